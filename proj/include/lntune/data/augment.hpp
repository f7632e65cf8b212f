#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "lntune/data/image.hpp"
#include "lntune/data/manifest.hpp"
#include "lntune/rng.hpp"

namespace lntune::data {

/// Training-time augmentations. Probabilities and magnitudes are defaults of
/// this toolkit, not tuned values.
struct AugmentConfig {
  double p_flip = 0.5;
  double p_affine = 0.3;
  double max_rotate_deg = 10.0;
  double max_scale = 0.1;  // scale in [1 - s, 1 + s]
  double max_translate = 0.05;  // fraction of the side
  double p_blur = 0.1;
  double max_blur_sigma = 1.0;
  double p_color = 0.3;
  double brightness = 0.2;
  double contrast = 0.2;
  double saturation = 0.2;
  double p_jpeg = 0.3;
  int jpeg_quality_min = 30;
  int jpeg_quality_max = 90;

  static AugmentConfig none() {
    AugmentConfig c;
    c.p_flip = c.p_affine = c.p_blur = c.p_color = c.p_jpeg = 0.0;
    return c;
  }

  void validate() const {
    for (double p : {p_flip, p_affine, p_blur, p_color, p_jpeg})
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("augmentation probabilities must be in [0, 1]");
    if (jpeg_quality_min < 1 || jpeg_quality_max > 100 || jpeg_quality_min > jpeg_quality_max)
      throw ConfigError("jpeg quality range must satisfy 1 <= min <= max <= 100");
  }

  Json to_json() const {
    Json j;
    j["p_flip"] = p_flip;
    j["p_affine"] = p_affine;
    j["max_rotate_deg"] = max_rotate_deg;
    j["max_scale"] = max_scale;
    j["max_translate"] = max_translate;
    j["p_blur"] = p_blur;
    j["max_blur_sigma"] = max_blur_sigma;
    j["p_color"] = p_color;
    j["brightness"] = brightness;
    j["contrast"] = contrast;
    j["saturation"] = saturation;
    j["p_jpeg"] = p_jpeg;
    j["jpeg_quality_min"] = jpeg_quality_min;
    j["jpeg_quality_max"] = jpeg_quality_max;
    return j;
  }

  static AugmentConfig from_json(const Json& j) {
    AugmentConfig c;
    c.p_flip = j.value("p_flip", c.p_flip);
    c.p_affine = j.value("p_affine", c.p_affine);
    c.max_rotate_deg = j.value("max_rotate_deg", c.max_rotate_deg);
    c.max_scale = j.value("max_scale", c.max_scale);
    c.max_translate = j.value("max_translate", c.max_translate);
    c.p_blur = j.value("p_blur", c.p_blur);
    c.max_blur_sigma = j.value("max_blur_sigma", c.max_blur_sigma);
    c.p_color = j.value("p_color", c.p_color);
    c.brightness = j.value("brightness", c.brightness);
    c.contrast = j.value("contrast", c.contrast);
    c.saturation = j.value("saturation", c.saturation);
    c.p_jpeg = j.value("p_jpeg", c.p_jpeg);
    c.jpeg_quality_min = j.value("jpeg_quality_min", c.jpeg_quality_min);
    c.jpeg_quality_max = j.value("jpeg_quality_max", c.jpeg_quality_max);
    c.validate();
    return c;
  }
};

namespace detail {

inline Image color_jitter(const Image& img, double b, double c, double s) {
  cv::Mat f;
  img.convertTo(f, CV_64FC3);
  cv::Mat gray;
  cv::cvtColor(img, gray, cv::COLOR_RGB2GRAY);
  const double mean = cv::mean(gray)[0];
  for (int y = 0; y < f.rows; ++y) {
    auto* p = f.ptr<cv::Vec3d>(y);
    for (int x = 0; x < f.cols; ++x) {
      cv::Vec3d v = p[x] * b;
      v = (v - cv::Vec3d(mean, mean, mean) * b) * c + cv::Vec3d(mean, mean, mean) * b;
      const double l = 0.299 * v[0] + 0.587 * v[1] + 0.114 * v[2];
      p[x] = (v - cv::Vec3d(l, l, l)) * s + cv::Vec3d(l, l, l);
    }
  }
  Image out;
  f.convertTo(out, CV_8UC3);  // saturating round
  return out;
}

inline Image jpeg_roundtrip(const Image& img, int quality) {
  cv::Mat bgr;
  cv::cvtColor(img, bgr, cv::COLOR_RGB2BGR);
  std::vector<uchar> buf;
  cv::imencode(".jpg", bgr, buf, {cv::IMWRITE_JPEG_QUALITY, quality});
  cv::Mat dec = cv::imdecode(buf, cv::IMREAD_COLOR);
  Image out;
  cv::cvtColor(dec, out, cv::COLOR_BGR2RGB);
  return out;
}

}  // namespace detail

/// Applies each augmentation with its probability, in a fixed order. The
/// number of random draws is fixed so one image's choices never shift the
/// stream of the next.
inline Image augment(const Image& img, Rng& rng, const AugmentConfig& cfg = {}) {
  const double u_flip = rng.uniform(), u_aff = rng.uniform(), u_blur = rng.uniform(), u_col = rng.uniform(),
               u_jpg = rng.uniform();
  const double rot = rng.uniform(-1, 1), scl = rng.uniform(-1, 1), tx = rng.uniform(-1, 1), ty = rng.uniform(-1, 1);
  const double sigma = rng.uniform(0.1, 1.0);
  const double jb = rng.uniform(-1, 1), jc = rng.uniform(-1, 1), js = rng.uniform(-1, 1);
  const double q = rng.uniform();

  Image out = img.clone();
  if (u_flip < cfg.p_flip) cv::flip(out, out, 1);
  if (u_aff < cfg.p_affine) {
    const cv::Point2f centre(out.cols / 2.0f, out.rows / 2.0f);
    cv::Mat m = cv::getRotationMatrix2D(centre, rot * cfg.max_rotate_deg, 1.0 + scl * cfg.max_scale);
    m.at<double>(0, 2) += tx * cfg.max_translate * out.cols;
    m.at<double>(1, 2) += ty * cfg.max_translate * out.rows;
    cv::warpAffine(out, out, m, out.size(), cv::INTER_LINEAR, cv::BORDER_REFLECT_101);
  }
  if (u_blur < cfg.p_blur) cv::GaussianBlur(out, out, cv::Size(0, 0), sigma * cfg.max_blur_sigma);
  if (u_col < cfg.p_color)
    out = detail::color_jitter(out, 1.0 + jb * cfg.brightness, 1.0 + jc * cfg.contrast, 1.0 + js * cfg.saturation);
  if (u_jpg < cfg.p_jpeg) {
    const int quality = cfg.jpeg_quality_min +
                        static_cast<int>(std::floor(q * (cfg.jpeg_quality_max - cfg.jpeg_quality_min + 1)));
    out = detail::jpeg_roundtrip(out, std::min(quality, cfg.jpeg_quality_max));
  }
  return out;
}

}  // namespace lntune::data
