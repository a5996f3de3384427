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

#include "chasm/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace chasm {

Matrix Matrix::identity(int n)
{
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::transposed() const
{
    Matrix t(c_, r_);
    for (int i = 0; i < r_; ++i)
        for (int j = 0; j < c_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

Matrix& Matrix::operator+=(const Matrix& o)
{
    if (r_ != o.r_ || c_ != o.c_) throw std::invalid_argument("Matrix +=: shape mismatch");
    for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& o)
{
    if (r_ != o.r_ || c_ != o.c_) throw std::invalid_argument("Matrix -=: shape mismatch");
    for (std::size_t i = 0; i < a_.size(); ++i) a_[i] -= o.a_[i];
    return *this;
}

Matrix& Matrix::operator*=(double s)
{
    for (double& v : a_) v *= s;
    return *this;
}

Matrix operator*(const Matrix& a, const Matrix& b)
{
    if (a.cols() != b.rows()) throw std::invalid_argument("Matrix *: inner dimension mismatch");
    Matrix c(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (int j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(double s, Matrix a) { return a *= s; }

double norm1(const Matrix& a)
{
    double m = 0.0;
    for (int j = 0; j < a.cols(); ++j) {
        double s = 0.0;
        for (int i = 0; i < a.rows(); ++i) s += std::abs(a(i, j));
        m = std::max(m, s);
    }
    return m;
}

double norm_inf(const Matrix& a)
{
    double m = 0.0;
    for (int i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (int j = 0; j < a.cols(); ++j) s += std::abs(a(i, j));
        m = std::max(m, s);
    }
    return m;
}

double max_abs(const Matrix& a)
{
    double m = 0.0;
    for (double v : a.values()) m = std::max(m, std::abs(v));
    return m;
}

double frobenius(const Matrix& a) { return std::sqrt(frobenius_inner(a, a)); }

double frobenius_inner(const Matrix& a, const Matrix& b)
{
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("frobenius_inner: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.values().size(); ++i) s += a.values()[i] * b.values()[i];
    return s;
}

double trace(const Matrix& a)
{
    double s = 0.0;
    for (int i = 0; i < std::min(a.rows(), a.cols()); ++i) s += a(i, i);
    return s;
}

namespace {

struct LU {
    Matrix lu;
    std::vector<int> perm;
    int sign = 1;
};

LU decompose(const Matrix& a)
{
    if (!a.square()) throw std::invalid_argument("LU: matrix must be square");
    const int n = a.rows();
    LU f{a, std::vector<int>(n), 1};
    for (int i = 0; i < n; ++i) f.perm[i] = i;
    for (int k = 0; k < n; ++k) {
        int piv = k;
        for (int i = k + 1; i < n; ++i)
            if (std::abs(f.lu(i, k)) > std::abs(f.lu(piv, k))) piv = i;
        if (f.lu(piv, k) == 0.0) throw std::runtime_error("LU: singular matrix");
        if (piv != k) {
            for (int j = 0; j < n; ++j) std::swap(f.lu(k, j), f.lu(piv, j));
            std::swap(f.perm[k], f.perm[piv]);
            f.sign = -f.sign;
        }
        for (int i = k + 1; i < n; ++i) {
            const double l = f.lu(i, k) / f.lu(k, k);
            f.lu(i, k) = l;
            for (int j = k + 1; j < n; ++j) f.lu(i, j) -= l * f.lu(k, j);
        }
    }
    return f;
}

}  // namespace

Matrix solve(const Matrix& a, const Matrix& b)
{
    if (a.rows() != b.rows()) throw std::invalid_argument("solve: dimension mismatch");
    const LU f = decompose(a);
    const int n = a.rows();
    Matrix x(n, b.cols());
    for (int col = 0; col < b.cols(); ++col) {
        std::vector<double> y(n);
        for (int i = 0; i < n; ++i) {
            double s = b(f.perm[i], col);
            for (int j = 0; j < i; ++j) s -= f.lu(i, j) * y[j];
            y[i] = s;
        }
        for (int i = n - 1; i >= 0; --i) {
            double s = y[i];
            for (int j = i + 1; j < n; ++j) s -= f.lu(i, j) * x(j, col);
            x(i, col) = s / f.lu(i, i);
        }
    }
    return x;
}

double determinant(const Matrix& a)
{
    if (!a.square()) throw std::invalid_argument("determinant: matrix must be square");
    if (a.rows() == 0) return 1.0;
    LU f;
    try {
        f = decompose(a);
    } catch (const std::runtime_error&) {
        return 0.0;
    }
    double d = f.sign;
    for (int i = 0; i < a.rows(); ++i) d *= f.lu(i, i);
    return d;
}

// Higham (2005), "The scaling and squaring method for the matrix exponential
// revisited": degree-13 Pade approximant, theta_13 = 5.371920351148152.
Matrix matrix_exp(const Matrix& a)
{
    if (!a.square()) throw std::invalid_argument("matrix_exp: matrix must be square, got " +
                                                 std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
    const int n = a.rows();
    if (n == 0) return a;
    for (double v : a.values())
        if (!std::isfinite(v)) throw std::invalid_argument("matrix_exp: non-finite entry");

    static constexpr double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                   1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                   670442572800.0,      33522128640.0,       1323241920.0,
                                   40840800.0,          960960.0,            16380.0,
                                   182.0,               1.0};
    constexpr double theta13 = 5.371920351148152;

    const double nrm = norm1(a);
    int s = 0;
    if (nrm > theta13) s = std::max(0, int(std::ceil(std::log2(nrm / theta13))));
    const Matrix A = std::ldexp(1.0, -s) * a;
    const Matrix I = Matrix::identity(n);
    const Matrix A2 = A * A;
    const Matrix A4 = A2 * A2;
    const Matrix A6 = A2 * A4;

    Matrix u_inner = b[13] * A6 + b[11] * A4 + b[9] * A2;
    Matrix U = A * (A6 * u_inner + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I);
    Matrix v_inner = b[12] * A6 + b[10] * A4 + b[8] * A2;
    Matrix V = A6 * v_inner + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;

    Matrix R = solve(V - U, V + U);
    for (int i = 0; i < s; ++i) R = R * R;
    return R;
}

Matrix expm_frechet(const Matrix& a, const Matrix& e)
{
    if (!a.square() || a.rows() != e.rows() || a.cols() != e.cols())
        throw std::invalid_argument("expm_frechet: shape mismatch");
    const int n = a.rows();
    Matrix big(2 * n, 2 * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            big(i, j) = a(i, j);
            big(n + i, n + j) = a(i, j);
            big(i, n + j) = e(i, j);
        }
    const Matrix x = matrix_exp(big);
    Matrix l(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) l(i, j) = x(i, n + j);
    return l;
}

}  // namespace chasm
