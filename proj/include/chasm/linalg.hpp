// Licensed under the Apache License, Version 2.0 (the "License"); you
// may not use this file except in compliance with the License.  You
// may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied.  See the License for the specific language governing
// permissions and limitations under the License.

#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace chasm {

/// Small dense row-major real matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols, double fill = 0.0)
        : r_(rows), c_(cols), a_(static_cast<std::size_t>(rows) * cols, fill)
    {
        if (rows < 0 || cols < 0) throw std::invalid_argument("Matrix: negative dimension");
    }

    static Matrix identity(int n);

    int rows() const noexcept { return r_; }
    int cols() const noexcept { return c_; }
    bool square() const noexcept { return r_ == c_; }

    double& operator()(int i, int j) noexcept { return a_[std::size_t(i) * c_ + j]; }
    double operator()(int i, int j) const noexcept { return a_[std::size_t(i) * c_ + j]; }

    std::span<double> values() noexcept { return a_; }
    std::span<const double> values() const noexcept { return a_; }

    Matrix transposed() const;

    Matrix& operator+=(const Matrix& o);
    Matrix& operator-=(const Matrix& o);
    Matrix& operator*=(double s);

    bool operator==(const Matrix& o) const = default;

private:
    int r_ = 0, c_ = 0;
    std::vector<double> a_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(double s, Matrix a);

double norm1(const Matrix& a);        // max column sum
double norm_inf(const Matrix& a);     // max row sum
double max_abs(const Matrix& a);
double frobenius(const Matrix& a);
double frobenius_inner(const Matrix& a, const Matrix& b);
double trace(const Matrix& a);

/// Solves A X = B by LU with partial pivoting. Throws on singular A.
Matrix solve(const Matrix& a, const Matrix& b);

double determinant(const Matrix& a);

/// Matrix exponential by scaling and squaring with a degree-13 Pade core.
Matrix matrix_exp(const Matrix& a);

/// Frechet derivative L(A, E) of the matrix exponential, read off the upper
/// right block of exp([[A, E], [0, A]]).
Matrix expm_frechet(const Matrix& a, const Matrix& e);

}  // namespace chasm
