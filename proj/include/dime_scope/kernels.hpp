#pragma once

// Data-parallel inner loops shared by fitting and scoring.
//
// Every kernel exists twice: `serial::` is the plain reference loop and
// `parallel::` distributes the same loop over OpenMP threads. Both call the
// same per-element code in the same summation order, so their outputs are
// bit-identical for any thread count. Tests compare the two directly; the
// rest of the library calls the unqualified names, which forward to
// `parallel::`.

#include <cstddef>
#include <span>
#include <vector>

#include "dime_scope/matrix.hpp"

namespace dime::kernels {

// Upper bound on OpenMP threads used by the parallel kernels. 0 restores the
// runtime default. No-op when built without OpenMP.
void set_thread_limit(int threads);
// Thread count the parallel kernels will use.
int thread_limit();

namespace serial {

// (x - c)ᵀ(x - c), with c broadcast over rows. An empty `center` means c = 0.
Matrix cross_product(const Matrix& x, std::span<const double> center);
// x·xᵀ.
Matrix outer_gram(const Matrix& x);
// For each row φ (after subtracting `center` when nonempty): the coordinates
// φ·basis written to `projection` (n×k) and the residual norm ‖φ − φ·basis·basisᵀ‖
// written to `residual`.
void project_residual(const Matrix& x, const Matrix& basis, std::span<const double> center,
                      Matrix& projection, std::span<double> residual);
// √((v − c)ᵀ·inverse·(v − c)) per row v of `x`; an empty `center` means c = 0.
void quadratic_norms(const Matrix& x, const Matrix& inverse, std::span<const double> center,
                     std::span<double> out);
// Per row: minimum over centroids of the quadratic-form distance and the
// index of the Euclidean-closest centroid (lowest index on ties).
void nearest_centroid(const Matrix& x, const Matrix& centroids, const Matrix& inverse,
                      std::span<double> min_distance, std::span<std::size_t> closest);

}  // namespace serial

namespace parallel {

Matrix cross_product(const Matrix& x, std::span<const double> center);
Matrix outer_gram(const Matrix& x);
void project_residual(const Matrix& x, const Matrix& basis, std::span<const double> center,
                      Matrix& projection, std::span<double> residual);
void quadratic_norms(const Matrix& x, const Matrix& inverse, std::span<const double> center,
                     std::span<double> out);
void nearest_centroid(const Matrix& x, const Matrix& centroids, const Matrix& inverse,
                      std::span<double> min_distance, std::span<std::size_t> closest);

}  // namespace parallel

using parallel::cross_product;
using parallel::nearest_centroid;
using parallel::outer_gram;
using parallel::project_residual;
using parallel::quadratic_norms;

std::vector<double> column_means(const Matrix& x);

}  // namespace dime::kernels
