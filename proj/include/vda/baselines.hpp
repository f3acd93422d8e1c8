#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vda/tensor.hpp"

namespace vda::baselines {

/// Sample mean and covariance (denominator n-1) of feature rows.
struct DomainStats {
  std::vector<double> mu;
  Tensor cov;  // [K,K]
  std::size_t count = 0;
  std::size_t dim() const { return mu.size(); }
};

DomainStats fit_stats(const Tensor& features);

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Eigenvalues are sorted in descending order; column j of `vectors` belongs
/// to values[j].
struct SymmetricEigen {
  std::vector<double> values;
  Tensor vectors;
};

SymmetricEigen jacobi_eigen(const Tensor& symmetric, int max_sweeps = 100);

/// A^p for a symmetric positive definite A. Throws NumericError if an
/// eigenvalue is not positive.
Tensor spd_power(const Tensor& symmetric, double p);

/// y = x * matrix + offset, matrix [K_in, K_out].
struct AffineTransform {
  Tensor matrix;
  std::vector<double> offset;

  std::size_t input_dim() const { return matrix.dim(0); }
  std::size_t output_dim() const { return matrix.dim(1); }
  std::vector<double> apply(std::span<const double> x) const;
  Tensor apply_rows(const Tensor& rows) const;
};

/// 1e-6 * trace(C) / K, floored at 1e-12.
double default_lambda(const DomainStats& stats);

/// Maps video-domain features onto image-domain statistics:
/// (x - mu_V)(C_V + l_V I)^(-1/2)(C_I + l_I I)^(1/2) + mu_I. An explicit
/// lambda is used on both sides; otherwise each side gets default_lambda.
AffineTransform coral_transform(const DomainStats& video, const DomainStats& image,
                                std::optional<double> lambda = std::nullopt);

struct PcaModel {
  AffineTransform projection;           // centring folded into the offset
  std::vector<double> explained_ratio;  // every component, descending
  std::size_t components = 0;
};

/// Fewest leading principal components whose cumulative explained variance
/// reaches `retain`.
PcaModel pca_transform(const Tensor& combined, double retain = 0.9);

/// "VDNXFRM1", u32 K_in, u32 K_out, f32 matrix row-major, f32 offset.
std::string serialize_transform(const AffineTransform& t);
AffineTransform deserialize_transform(const std::string& bytes, const std::string& what = "transform");
void save_transform(const std::filesystem::path& path, const AffineTransform& t);
AffineTransform load_transform(const std::filesystem::path& path);

}  // namespace vda::baselines
