#include "vda/image.hpp"

#include <algorithm>
#include <cmath>

#include "vda/error.hpp"

namespace vda {

Image::Image(std::size_t width, std::size_t height, std::vector<double> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (pixels_.size() != width_ * height_) throw ShapeError("image: pixel count does not match size");
}

Image Image::flipped_horizontally() const {
  Image out(width_, height_);
  for (std::size_t r = 0; r < height_; ++r)
    for (std::size_t c = 0; c < width_; ++c) out.at(r, c) = at(r, width_ - 1 - c);
  return out;
}

void Image::clamp_unit() {
  for (double& v : pixels_) v = std::clamp(v, 0.0, 1.0);
}

double laplacian_energy(const Image& img) {
  if (img.width() < 3 || img.height() < 3) return 0.0;
  double s = 0.0;
  for (std::size_t r = 1; r + 1 < img.height(); ++r)
    for (std::size_t c = 1; c + 1 < img.width(); ++c) {
      const double lap = img.at(r - 1, c) + img.at(r + 1, c) + img.at(r, c - 1) + img.at(r, c + 1) -
                         4.0 * img.at(r, c);
      s += std::abs(lap);
    }
  return s / static_cast<double>((img.height() - 2) * (img.width() - 2));
}

}  // namespace vda
