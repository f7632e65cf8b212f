#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "lntune/encoder_spec.hpp"
#include "lntune/errors.hpp"
#include "lntune/vit.hpp"

namespace lntune::data {

/// 8-bit RGB image (CV_8UC3, RGB channel order).
using Image = cv::Mat;

inline Image read_rgb(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw IoError("cannot read image " + path.string());
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  return rgb;
}

/// Writes a lossless PNG. Parent directories are created.
inline void write_png(const std::filesystem::path& path, const Image& rgb) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  const std::vector<int> params{cv::IMWRITE_PNG_COMPRESSION, 3};
  if (!cv::imwrite(path.string(), bgr, params)) throw IoError("cannot write image " + path.string());
}

/// Writes one normalized model-input row (HWC order) for an RGB crop,
/// resizing to the encoder's input size when needed.
template <class Scalar>
void to_model_input(const Image& rgb, const EncoderSpec& spec, Scalar* row) {
  if (rgb.type() != CV_8UC3) throw ShapeMismatch("to_model_input: expected an 8-bit RGB image");
  cv::Mat src = rgb;
  if (rgb.rows != spec.image_size || rgb.cols != spec.image_size)
    cv::resize(rgb, src, cv::Size(spec.image_size, spec.image_size), 0, 0, cv::INTER_AREA);
  const auto mean = spec.pixel_mean();
  const auto std = spec.pixel_std();
  for (int y = 0; y < src.rows; ++y) {
    const auto* p = src.ptr<cv::Vec3b>(y);
    for (int x = 0; x < src.cols; ++x)
      for (int c = 0; c < 3; ++c)
        row[(y * src.cols + x) * 3 + c] = static_cast<Scalar>((p[x][c] / 255.0 - mean[c]) / std[c]);
  }
}

template <class Scalar>
Mat<Scalar> to_model_input(const std::vector<Image>& images, const EncoderSpec& spec) {
  Mat<Scalar> out(static_cast<Eigen::Index>(images.size()), spec.image_size * spec.image_size * 3);
  for (std::size_t i = 0; i < images.size(); ++i)
    to_model_input(images[i], spec, out.row(static_cast<Eigen::Index>(i)).data());
  return out;
}

}  // namespace lntune::data
