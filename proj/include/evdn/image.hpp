#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "evdn/event.hpp"

namespace evdn {

/// 8-bit grayscale image, row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0);

  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

/// Intensity frame with its capture time and an opaque pose tag shared by frames of the
/// same camera trajectory across trials.
struct ApsFrame {
  GrayImage image;
  std::int64_t t_us = 0;
  std::string pose_tag;
  friend bool operator==(const ApsFrame&, const ApsFrame&) = default;
};

/// Binary PGM (P5, maxval 255). The pose tag travels in a "# pose=<tag>" comment.
void write_pgm(const GrayImage& image, const std::filesystem::path& path,
               const std::string& pose_tag = {});
GrayImage read_pgm(const std::filesystem::path& path, std::string* pose_tag = nullptr);

/// Frames stored as <dir>/<t_us>.pgm.
void write_frames(const std::vector<ApsFrame>& frames, const std::filesystem::path& dir);
/// Reads every <t_us>.pgm in `dir`, sorted by time; checks dimensions against `geometry`.
std::vector<ApsFrame> read_frames(const std::filesystem::path& dir, const SensorGeometry& geometry);

}  // namespace evdn
