#pragma once
/// \file tridiag.hpp
/// \brief Tridiagonal LU with partial pivoting (Thomas algorithm hardened
///        with row swaps), templated over real and complex scalars.
///
/// Pivoting matters here: the Crank-Nicolson matrices I + i*(dt/2)*A lose
/// strict diagonal dominance near the origin where the attractive 1/x^2
/// potential shrinks the diagonal, and the second upper band (du2) created
/// by row swaps keeps the elimination stable in that regime.

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace hardy_nls {

template <class T>
struct TridiagLU {
  int n = 0;
  std::vector<T> dl;   ///< multipliers (n-1)
  std::vector<T> d;    ///< U main diagonal (n)
  std::vector<T> du;   ///< U first superdiagonal (n-1)
  std::vector<T> du2;  ///< U second superdiagonal (n-2), nonzero only after swaps
  std::vector<int> swapped;  ///< 1 where rows i,i+1 were exchanged
};

template <class T>
inline double tri_abs(const T& v) {
  return std::abs(v);
}

/// Factor the tridiagonal matrix with subdiagonal dl, diagonal d,
/// superdiagonal du (sizes n-1, n, n-1).
template <class T>
TridiagLU<T> tridiag_factor(std::vector<T> dl, std::vector<T> d, std::vector<T> du) {
  const int n = static_cast<int>(d.size());
  if (n < 1 || static_cast<int>(dl.size()) != n - 1 || static_cast<int>(du.size()) != n - 1)
    throw std::invalid_argument("tridiag_factor: inconsistent band sizes");
  TridiagLU<T> lu;
  lu.n = n;
  lu.dl = std::move(dl);
  lu.d = std::move(d);
  lu.du = std::move(du);
  lu.du2.assign(n > 2 ? static_cast<std::size_t>(n - 2) : 0u, T(0));
  lu.swapped.assign(n > 1 ? static_cast<std::size_t>(n - 1) : 0u, 0);
  for (int i = 0; i + 1 < n; ++i) {
    const std::size_t ui = static_cast<std::size_t>(i);
    if (tri_abs(lu.d[ui]) >= tri_abs(lu.dl[ui])) {
      if (tri_abs(lu.d[ui]) == 0.0)
        throw std::runtime_error("tridiag_factor: exactly singular matrix");
      const T fact = lu.dl[ui] / lu.d[ui];
      lu.dl[ui] = fact;
      lu.d[ui + 1] -= fact * lu.du[ui];
      // du2[i] stays zero
    } else {
      const T fact = lu.d[ui] / lu.dl[ui];
      lu.d[ui] = lu.dl[ui];
      lu.dl[ui] = fact;
      const T temp = lu.du[ui];
      lu.du[ui] = lu.d[ui + 1];
      lu.d[ui + 1] = temp - fact * lu.d[ui + 1];
      if (i + 2 < n) {
        lu.du2[ui] = lu.du[ui + 1];
        lu.du[ui + 1] = -fact * lu.du[ui + 1];
      }
      lu.swapped[ui] = 1;
    }
  }
  if (tri_abs(lu.d[static_cast<std::size_t>(n - 1)]) == 0.0)
    throw std::runtime_error("tridiag_factor: exactly singular matrix");
  return lu;
}

/// Solve LU x = b in place.
template <class T>
void tridiag_solve(const TridiagLU<T>& lu, std::vector<T>& b) {
  const int n = lu.n;
  if (static_cast<int>(b.size()) != n)
    throw std::invalid_argument("tridiag_solve: rhs size does not match factorization");
  for (int i = 0; i + 1 < n; ++i) {
    const std::size_t ui = static_cast<std::size_t>(i);
    if (!lu.swapped[ui]) {
      b[ui + 1] -= lu.dl[ui] * b[ui];
    } else {
      const T temp = b[ui];
      b[ui] = b[ui + 1];
      b[ui + 1] = temp - lu.dl[ui] * b[ui];
    }
  }
  b[static_cast<std::size_t>(n - 1)] /= lu.d[static_cast<std::size_t>(n - 1)];
  if (n > 1) {
    const std::size_t i = static_cast<std::size_t>(n - 2);
    b[i] = (b[i] - lu.du[i] * b[i + 1]) / lu.d[i];
  }
  for (int i = n - 3; i >= 0; --i) {
    const std::size_t ui = static_cast<std::size_t>(i);
    b[ui] = (b[ui] - lu.du[ui] * b[ui + 1] - lu.du2[ui] * b[ui + 2]) / lu.d[ui];
  }
}

/// Convenience: factor and solve a single system.
template <class T>
std::vector<T> tridiag_solve_once(std::vector<T> dl, std::vector<T> d, std::vector<T> du,
                                  std::vector<T> b) {
  const TridiagLU<T> lu = tridiag_factor(std::move(dl), std::move(d), std::move(du));
  tridiag_solve(lu, b);
  return b;
}

/// LDL^T factorization of a symmetric positive-definite pentadiagonal
/// matrix (main diagonal d, first off-diagonal e, second off-diagonal f).
/// No pivoting: positive definiteness is a precondition, and the factor
/// throws if a pivot fails to stay positive.
template <class T>
struct PentaLDL {
  int n = 0;
  std::vector<T> d;   ///< D pivots (n)
  std::vector<T> l1;  ///< L first subdiagonal (n-1)
  std::vector<T> l2;  ///< L second subdiagonal (n-2)
};

template <class T>
PentaLDL<T> penta_factor(const std::vector<T>& diag, const std::vector<T>& off1,
                         const std::vector<T>& off2) {
  const int n = static_cast<int>(diag.size());
  if (n < 3 || static_cast<int>(off1.size()) != n - 1 ||
      static_cast<int>(off2.size()) != n - 2)
    throw std::invalid_argument("penta_factor: inconsistent band sizes");
  PentaLDL<T> f;
  f.n = n;
  f.d.assign(static_cast<std::size_t>(n), T(0));
  f.l1.assign(static_cast<std::size_t>(n - 1), T(0));
  f.l2.assign(static_cast<std::size_t>(n - 2), T(0));
  for (int i = 0; i < n; ++i) {
    const std::size_t ui = static_cast<std::size_t>(i);
    T pivot = diag[ui];
    if (i >= 1) pivot -= f.l1[ui - 1] * f.l1[ui - 1] * f.d[ui - 1];
    if (i >= 2) pivot -= f.l2[ui - 2] * f.l2[ui - 2] * f.d[ui - 2];
    if (!(pivot > T(0)))
      throw std::runtime_error("penta_factor: matrix is not positive definite");
    f.d[ui] = pivot;
    if (i + 1 < n) {
      T v = off1[ui];
      if (i >= 1) v -= f.l1[ui - 1] * f.l2[ui - 1] * f.d[ui - 1];
      f.l1[ui] = v / pivot;
    }
    if (i + 2 < n) f.l2[ui] = off2[ui] / pivot;
  }
  return f;
}

/// Solve L D L^T x = b in place.
template <class T>
void penta_solve(const PentaLDL<T>& f, std::vector<T>& b) {
  const int n = f.n;
  if (static_cast<int>(b.size()) != n)
    throw std::invalid_argument("penta_solve: rhs size does not match factorization");
  for (int i = 1; i < n; ++i) {
    const std::size_t ui = static_cast<std::size_t>(i);
    b[ui] -= f.l1[ui - 1] * b[ui - 1];
    if (i >= 2) b[ui] -= f.l2[ui - 2] * b[ui - 2];
  }
  for (int i = 0; i < n; ++i) b[static_cast<std::size_t>(i)] /= f.d[static_cast<std::size_t>(i)];
  for (int i = n - 2; i >= 0; --i) {
    const std::size_t ui = static_cast<std::size_t>(i);
    b[ui] -= f.l1[ui] * b[ui + 1];
    if (i + 2 < n) b[ui] -= f.l2[ui] * b[ui + 2];
  }
}

}  // namespace hardy_nls
