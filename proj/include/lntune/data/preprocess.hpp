#pragma once

#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>
#include <opencv2/videoio.hpp>

#include "lntune/data/image.hpp"
#include "lntune/data/manifest.hpp"
#include "lntune/errors.hpp"
#include "lntune/hash.hpp"

namespace lntune::data {

/// Evenly spaced frame indices: round(j (n-1) / (k-1)) for j < k, or every
/// frame once when the video is shorter than k.
inline std::vector<int> sample_frame_indices(int n_frames, int k) {
  if (n_frames < 1 || k < 1) throw ConfigError("sample_frame_indices: n_frames and k must be positive");
  std::vector<int> idx;
  if (n_frames <= k) {
    for (int i = 0; i < n_frames; ++i) idx.push_back(i);
    return idx;
  }
  if (k == 1) return {0};
  idx.reserve(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j)
    idx.push_back(static_cast<int>(std::lround(static_cast<double>(j) * (n_frames - 1) / (k - 1))));
  return idx;
}

struct PreprocessConfig {
  int frames_per_video = 32;
  double bbox_margin = 1.3;
  int crop_size = 256;
  std::string detector = "stub";
  bool alignment = true;
  std::string output_format = "png";

  void validate() const {
    if (frames_per_video < 1) throw ConfigError("frames_per_video must be >= 1");
    if (!(bbox_margin >= 1.0) || !std::isfinite(bbox_margin)) throw ConfigError("bbox_margin must be >= 1");
    if (crop_size < 1) throw ConfigError("crop_size must be >= 1");
    if (output_format != "png") throw ConfigError("output_format must be a lossless format (png)");
  }

  Json to_json() const {
    Json j;
    j["frames_per_video"] = frames_per_video;
    j["bbox_margin"] = bbox_margin;
    j["crop_size"] = crop_size;
    j["detector"] = detector;
    j["alignment"] = alignment;
    j["output_format"] = output_format;
    return j;
  }

  static PreprocessConfig from_json(const Json& j) {
    PreprocessConfig c;
    c.frames_per_video = j.value("frames_per_video", c.frames_per_video);
    c.bbox_margin = j.value("bbox_margin", c.bbox_margin);
    c.crop_size = j.value("crop_size", c.crop_size);
    c.detector = j.value("detector", c.detector);
    c.alignment = j.value("alignment", c.alignment);
    c.output_format = j.value("output_format", c.output_format);
    c.validate();
    return c;
  }

  /// SHA-256 of the canonical JSON form; changes iff any field changes.
  std::string fingerprint() const { return sha256_hex(to_json().dump()); }

  friend bool operator==(const PreprocessConfig&, const PreprocessConfig&) = default;
};

struct FaceDetection {
  cv::Rect2d box;  // x, y, width, height in pixels
  std::array<cv::Point2d, 5> landmarks;  // eyes, nose, mouth corners
  double area() const { return box.width * box.height; }
};

/// Five-point landmark template in unit face-box coordinates.
inline const std::array<cv::Point2d, 5>& canonical_landmarks() {
  static const std::array<cv::Point2d, 5> t{{{38.2946 / 112.0, 51.6963 / 112.0},
                                             {73.5318 / 112.0, 51.5014 / 112.0},
                                             {56.0252 / 112.0, 71.7366 / 112.0},
                                             {41.5493 / 112.0, 92.3655 / 112.0},
                                             {70.7299 / 112.0, 92.2041 / 112.0}}};
  return t;
}

/// Landmarks placed at their canonical positions inside a box.
inline std::array<cv::Point2d, 5> template_landmarks(const cv::Rect2d& box) {
  std::array<cv::Point2d, 5> out;
  const auto& t = canonical_landmarks();
  for (std::size_t i = 0; i < 5; ++i) out[i] = {box.x + t[i].x * box.width, box.y + t[i].y * box.height};
  return out;
}

class FaceDetector {
 public:
  virtual ~FaceDetector() = default;
  virtual std::vector<FaceDetection> detect(const Image& rgb) const = 0;
};

/// Deterministic detector for fixtures: every connected region of bright
/// pixels (gray >= threshold) of at least min_area pixels is a face.
class StubDetector : public FaceDetector {
 public:
  explicit StubDetector(int threshold = 128, int min_area = 16) : threshold_(threshold), min_area_(min_area) {}

  std::vector<FaceDetection> detect(const Image& rgb) const override {
    cv::Mat gray, mask, labels, stats, centroids;
    cv::cvtColor(rgb, gray, cv::COLOR_RGB2GRAY);
    cv::threshold(gray, mask, threshold_ - 1, 255, cv::THRESH_BINARY);
    const int n = cv::connectedComponentsWithStats(mask, labels, stats, centroids, 8, CV_32S);
    std::vector<FaceDetection> out;
    for (int i = 1; i < n; ++i) {
      if (stats.at<int>(i, cv::CC_STAT_AREA) < min_area_) continue;
      FaceDetection d;
      d.box = cv::Rect2d(stats.at<int>(i, cv::CC_STAT_LEFT), stats.at<int>(i, cv::CC_STAT_TOP),
                         stats.at<int>(i, cv::CC_STAT_WIDTH), stats.at<int>(i, cv::CC_STAT_HEIGHT));
      d.landmarks = template_landmarks(d.box);
      out.push_back(d);
    }
    return out;
  }

 private:
  int threshold_;
  int min_area_;
};

/// Treats the whole frame as the face; for inputs that are already crops.
class FullFrameDetector : public FaceDetector {
 public:
  std::vector<FaceDetection> detect(const Image& rgb) const override {
    FaceDetection d;
    d.box = cv::Rect2d(0, 0, rgb.cols, rgb.rows);
    d.landmarks = template_landmarks(d.box);
    return {d};
  }
};

using DetectorFactory = std::function<std::unique_ptr<FaceDetector>()>;

inline std::map<std::string, DetectorFactory>& detector_registry() {
  static std::map<std::string, DetectorFactory> registry{
      {"stub", [] { return std::make_unique<StubDetector>(); }},
      {"full_frame", [] { return std::make_unique<FullFrameDetector>(); }},
  };
  return registry;
}

inline void register_detector(const std::string& name, DetectorFactory factory) {
  detector_registry()[name] = std::move(factory);
}

inline std::unique_ptr<FaceDetector> make_detector(const std::string& name) {
  const auto& reg = detector_registry();
  const auto it = reg.find(name);
  if (it == reg.end()) throw ConfigError("no face detector registered as '" + name + "'");
  return it->second();
}

/// Largest-area detection, or nullptr when there is none.
inline const FaceDetection* largest_face(const std::vector<FaceDetection>& faces) {
  const FaceDetection* best = nullptr;
  for (const auto& f : faces)
    if (!best || f.area() > best->area()) best = &f;
  return best;
}

/// 2x3 affine map from frame pixels to crop pixels. With alignment the
/// landmarks are fitted to the canonical template by a similarity transform
/// and the canonical unit face box is used; without it the detector box is
/// squared around its centre. Either box is then enlarged by the margin.
inline cv::Mat crop_transform(const FaceDetection& face, const PreprocessConfig& cfg) {
  Eigen::Matrix3d to_unit = Eigen::Matrix3d::Identity();
  if (cfg.alignment) {
    Eigen::Matrix<double, 2, 5> src, dst;
    const auto& t = canonical_landmarks();
    for (int i = 0; i < 5; ++i) {
      src.col(i) << face.landmarks[static_cast<std::size_t>(i)].x, face.landmarks[static_cast<std::size_t>(i)].y;
      dst.col(i) << t[static_cast<std::size_t>(i)].x, t[static_cast<std::size_t>(i)].y;
    }
    to_unit = Eigen::umeyama(src, dst, true);
  } else {
    const double side = std::max(face.box.width, face.box.height);
    if (!(side > 0)) throw NoFaceFound("empty face box");
    const double cx = face.box.x + face.box.width / 2, cy = face.box.y + face.box.height / 2;
    to_unit << 1 / side, 0, 0.5 - cx / side, 0, 1 / side, 0.5 - cy / side, 0, 0, 1;
  }
  const double s = cfg.crop_size / cfg.bbox_margin;
  const double off = cfg.crop_size * 0.5 - 0.5 * s;
  Eigen::Matrix3d to_crop;
  to_crop << s, 0, off, 0, s, off, 0, 0, 1;
  const Eigen::Matrix3d m = to_crop * to_unit;
  cv::Mat out(2, 3, CV_64F);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 3; ++c) out.at<double>(r, c) = m(r, c);
  return out;
}

inline Image crop_face(const Image& frame, const FaceDetection& face, const PreprocessConfig& cfg) {
  Image out;
  cv::warpAffine(frame, out, crop_transform(face, cfg), cv::Size(cfg.crop_size, cfg.crop_size), cv::INTER_LINEAR,
                 cv::BORDER_CONSTANT, cv::Scalar(0, 0, 0));
  return out;
}

/// Frames of one raw video.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual int size() = 0;
  /// RGB frames at the given sorted indices.
  virtual std::vector<Image> read(const std::vector<int>& indices) = 0;
};

/// A directory of still images ordered by file name.
class ImageSequenceSource : public FrameSource {
 public:
  explicit ImageSequenceSource(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
      const auto ext = e.path().extension().string();
      if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp") files_.push_back(e.path());
    }
    std::sort(files_.begin(), files_.end());
  }
  int size() override { return static_cast<int>(files_.size()); }
  std::vector<Image> read(const std::vector<int>& indices) override {
    std::vector<Image> out;
    for (int i : indices) out.push_back(read_rgb(files_.at(static_cast<std::size_t>(i))));
    return out;
  }

 private:
  std::vector<std::filesystem::path> files_;
};

/// A container file decoded with OpenCV. Frames are counted by decoding, since
/// container frame counts are not reliable.
class VideoFileSource : public FrameSource {
 public:
  explicit VideoFileSource(std::filesystem::path path) : path_(std::move(path)) {}

  int size() override {
    if (count_ < 0) {
      cv::VideoCapture cap = open();
      count_ = 0;
      while (cap.grab()) ++count_;
    }
    return count_;
  }

  std::vector<Image> read(const std::vector<int>& indices) override {
    cv::VideoCapture cap = open();
    std::vector<Image> out;
    int pos = 0;
    for (int want : indices) {
      while (pos < want && cap.grab()) ++pos;
      cv::Mat bgr;
      if (pos != want || !cap.read(bgr)) throw IoError("cannot decode frame " + std::to_string(want) + " of " + path_.string());
      ++pos;
      Image rgb;
      cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
      out.push_back(rgb);
    }
    return out;
  }

 private:
  cv::VideoCapture open() const {
    cv::VideoCapture cap(path_.string());
    if (!cap.isOpened()) throw IoError("cannot open video " + path_.string());
    return cap;
  }
  std::filesystem::path path_;
  int count_ = -1;
};

inline std::unique_ptr<FrameSource> open_frame_source(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) return std::make_unique<ImageSequenceSource>(path);
  return std::make_unique<VideoFileSource>(path);
}

struct PreprocessResult {
  std::vector<std::filesystem::path> crops;
  int sampled = 0;
  int skipped = 0;
};

/// Samples frames, crops the largest face of each and writes lossless crops
/// to out_dir/frame_NNNN.png (NNNN = source frame index).
inline PreprocessResult preprocess_video(FrameSource& source, const PreprocessConfig& cfg, const FaceDetector& detector,
                                         const std::filesystem::path& out_dir) {
  cfg.validate();
  const int n = source.size();
  if (n < 1) throw NoFaceFound("video has no frames");
  const auto indices = sample_frame_indices(n, cfg.frames_per_video);
  const auto frames = source.read(indices);
  PreprocessResult res;
  res.sampled = static_cast<int>(indices.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto faces = detector.detect(frames[i]);
    const FaceDetection* face = largest_face(faces);
    if (!face) {
      ++res.skipped;
      continue;
    }
    char name[32];
    std::snprintf(name, sizeof name, "frame_%04d.png", indices[i]);
    const auto path = out_dir / name;
    write_png(path, crop_face(frames[i], *face, cfg));
    res.crops.push_back(path);
  }
  if (res.crops.empty()) throw NoFaceFound("no face found in any sampled frame");
  return res;
}

}  // namespace lntune::data
