#include "vda/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vda/binary_io.hpp"
#include "vda/error.hpp"

namespace vda::baselines {
namespace {

constexpr std::string_view kTransformMagic = "VDNXFRM1";

void check_square(const Tensor& a, const char* what) {
  if (a.rank() != 2 || a.dim(0) != a.dim(1)) throw ShapeError(std::string(what) + ": expected a square matrix");
}

Tensor multiply(const Tensor& a, const Tensor& b) {
  const std::size_t n = a.dim(0), m = a.dim(1), p = b.dim(1);
  Tensor out(Shape{n, p});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < m; ++k) {
      const double aik = a.at(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < p; ++j) out.at(i, j) += aik * b.at(k, j);
    }
  return out;
}

Tensor add_ridge(const Tensor& c, double lambda) {
  Tensor out = c;
  for (std::size_t i = 0; i < c.dim(0); ++i) out.at(i, i) += lambda;
  return out;
}

}  // namespace

DomainStats fit_stats(const Tensor& features) {
  if (features.rank() != 2) throw ShapeError("fit_stats: expected [n,K] features");
  const std::size_t n = features.dim(0), k = features.dim(1);
  if (n < 2) throw ShapeError("fit_stats: need at least 2 rows, got " + std::to_string(n));
  DomainStats s{std::vector<double>(k, 0.0), Tensor(Shape{k, k}), n};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < k; ++c) s.mu[c] += features.at(i, c);
  for (double& m : s.mu) m /= static_cast<double>(n);
  std::vector<double> d(k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) d[c] = features.at(i, c) - s.mu[c];
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = a; b < k; ++b) s.cov.at(a, b) += d[a] * d[b];
  }
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a; b < k; ++b) {
      s.cov.at(a, b) /= static_cast<double>(n - 1);
      s.cov.at(b, a) = s.cov.at(a, b);
    }
  return s;
}

SymmetricEigen jacobi_eigen(const Tensor& symmetric, int max_sweeps) {
  check_square(symmetric, "jacobi_eigen");
  const std::size_t n = symmetric.dim(0);
  Tensor a = symmetric;
  Tensor v(Shape{n, n});
  for (std::size_t i = 0; i < n; ++i) v.at(i, i) = 1.0;

  double scale = 0.0;
  for (double x : a.data()) scale += x * x;
  const double tol = 1e-30 * std::max(scale, 1e-300);

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a.at(p, q) * a.at(p, q);
    if (off <= tol) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a.at(p, q);
        if (apq == 0.0) continue;
        const double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a.at(k, p), akq = a.at(k, q);
          a.at(k, p) = c * akp - s * akq;
          a.at(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a.at(p, k), aqk = a.at(q, k);
          a.at(p, k) = c * apk - s * aqk;
          a.at(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v.at(k, p), vkq = v.at(k, q);
          v.at(k, p) = c * vkp - s * vkq;
          v.at(k, q) = s * vkp + c * vkq;
        }
      }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a.at(x, x) > a.at(y, y); });
  SymmetricEigen out{std::vector<double>(n), Tensor(Shape{n, n})};
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = a.at(order[j], order[j]);
    for (std::size_t i = 0; i < n; ++i) out.vectors.at(i, j) = v.at(i, order[j]);
  }
  return out;
}

Tensor spd_power(const Tensor& symmetric, double p) {
  check_square(symmetric, "spd_power");
  const SymmetricEigen e = jacobi_eigen(symmetric);
  const std::size_t n = e.values.size();
  std::vector<double> powered(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (!(e.values[j] > 0.0)) {
      throw NumericError("spd_power: matrix is not positive definite (eigenvalue " + std::to_string(e.values[j]) + ")");
    }
    powered[j] = std::pow(e.values[j], p);
  }
  Tensor out(Shape{n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = i; k < n; ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += e.vectors.at(i, j) * powered[j] * e.vectors.at(k, j);
      out.at(i, k) = s;
      out.at(k, i) = s;
    }
  return out;
}

std::vector<double> AffineTransform::apply(std::span<const double> x) const {
  if (x.size() != input_dim()) {
    throw ShapeError("transform expects dimension " + std::to_string(input_dim()) + ", got " + std::to_string(x.size()));
  }
  std::vector<double> y = offset;
  for (std::size_t i = 0; i < input_dim(); ++i)
    for (std::size_t j = 0; j < output_dim(); ++j) y[j] += x[i] * matrix.at(i, j);
  return y;
}

Tensor AffineTransform::apply_rows(const Tensor& rows) const {
  if (rows.rank() != 2 || rows.dim(1) != input_dim()) {
    throw ShapeError("transform expects [n," + std::to_string(input_dim()) + "], got " + shape_string(rows.shape()));
  }
  Tensor out = multiply(rows, matrix);
  for (std::size_t i = 0; i < out.dim(0); ++i)
    for (std::size_t j = 0; j < out.dim(1); ++j) out.at(i, j) += offset[j];
  return out;
}

double default_lambda(const DomainStats& stats) {
  double trace = 0.0;
  for (std::size_t i = 0; i < stats.dim(); ++i) trace += stats.cov.at(i, i);
  return std::max(1e-6 * trace / static_cast<double>(stats.dim()), 1e-12);
}

AffineTransform coral_transform(const DomainStats& video, const DomainStats& image, std::optional<double> lambda) {
  if (video.dim() != image.dim() || video.dim() == 0) throw ShapeError("coral: domain dimensions differ");
  if (lambda && !(*lambda > 0.0)) throw ConfigError("coral: lambda must be positive");
  const double lv = lambda ? *lambda : default_lambda(video);
  const double li = lambda ? *lambda : default_lambda(image);
  const Tensor whiten = spd_power(add_ridge(video.cov, lv), -0.5);
  const Tensor color = spd_power(add_ridge(image.cov, li), 0.5);
  AffineTransform t{multiply(whiten, color), image.mu};
  for (std::size_t j = 0; j < t.output_dim(); ++j)
    for (std::size_t i = 0; i < t.input_dim(); ++i) t.offset[j] -= video.mu[i] * t.matrix.at(i, j);
  return t;
}

PcaModel pca_transform(const Tensor& combined, double retain) {
  if (!(retain > 0.0 && retain <= 1.0)) throw ConfigError("pca: retain must be in (0, 1]");
  const DomainStats s = fit_stats(combined);
  const SymmetricEigen e = jacobi_eigen(s.cov);
  const std::size_t k = s.dim();
  double total = 0.0;
  for (double v : e.values) total += std::max(v, 0.0);
  PcaModel m;
  m.explained_ratio.resize(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) m.explained_ratio[j] = total > 0.0 ? std::max(e.values[j], 0.0) / total : 0.0;
  double cum = 0.0;
  m.components = k;
  for (std::size_t j = 0; j < k; ++j) {
    cum += m.explained_ratio[j];
    if (cum >= retain - 1e-12) {
      m.components = j + 1;
      break;
    }
  }
  m.projection.matrix = Tensor(Shape{k, m.components});
  m.projection.offset.assign(m.components, 0.0);
  for (std::size_t j = 0; j < m.components; ++j)
    for (std::size_t i = 0; i < k; ++i) {
      m.projection.matrix.at(i, j) = e.vectors.at(i, j);
      m.projection.offset[j] -= s.mu[i] * e.vectors.at(i, j);
    }
  return m;
}

std::string serialize_transform(const AffineTransform& t) {
  if (t.matrix.rank() != 2 || t.offset.size() != t.output_dim()) throw ShapeError("transform: malformed");
  ByteWriter w;
  w.bytes(kTransformMagic.data(), kTransformMagic.size());
  w.u32(static_cast<std::uint32_t>(t.input_dim()));
  w.u32(static_cast<std::uint32_t>(t.output_dim()));
  for (double v : t.matrix.data()) w.f32(static_cast<float>(v));
  for (double v : t.offset) w.f32(static_cast<float>(v));
  return w.take();
}

AffineTransform deserialize_transform(const std::string& bytes, const std::string& what) {
  ByteReader r(bytes, what);
  r.expect_magic(kTransformMagic);
  const std::size_t kin = r.u32(), kout = r.u32();
  if (r.remaining() != (kin * kout + kout) * 4) throw FormatError(what + ": size does not match header");
  AffineTransform t{Tensor(Shape{kin, kout}), std::vector<double>(kout)};
  for (double& v : t.matrix.data()) v = r.f32();
  for (double& v : t.offset) v = r.f32();
  r.expect_end();
  return t;
}

void save_transform(const std::filesystem::path& path, const AffineTransform& t) {
  write_file(path, serialize_transform(t));
}

AffineTransform load_transform(const std::filesystem::path& path) {
  return deserialize_transform(read_file(path), path.string());
}

}  // namespace vda::baselines
