#include "evdn/image.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <stdexcept>

namespace evdn {

GrayImage::GrayImage(int w, int h, std::uint8_t fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {
  if (w <= 0 || h <= 0) throw std::invalid_argument("image dimensions must be positive");
}

void write_pgm(const GrayImage& image, const std::filesystem::path& path, const std::string& pose_tag) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "P5\n";
  if (!pose_tag.empty()) out << "# pose=" << pose_tag << '\n';
  out << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

namespace {

// Next header token, collecting "# pose=" comments along the way.
std::string next_token(std::istream& in, std::string* pose_tag, const std::string& where) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      std::string comment;
      std::getline(in, comment);
      const std::string key = " pose=";
      if (pose_tag && comment.rfind(key, 0) == 0) *pose_tag = comment.substr(key.size());
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  if (tok.empty()) throw std::runtime_error("truncated PGM header: " + where);
  return tok;
}

}  // namespace

GrayImage read_pgm(const std::filesystem::path& path, std::string* pose_tag) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::string where = path.string();
  if (next_token(in, pose_tag, where) != "P5") throw std::runtime_error("not a binary PGM (P5): " + where);
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_token(in, pose_tag, where));
    h = std::stoi(next_token(in, pose_tag, where));
    maxval = std::stoi(next_token(in, pose_tag, where));
  } catch (const std::logic_error&) {
    throw std::runtime_error("malformed PGM header: " + where);
  }
  if (maxval != 255) throw std::runtime_error("only 8-bit PGM is supported: " + where);
  GrayImage img(w, h);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
    throw std::runtime_error("truncated PGM pixel data: " + where);
  return img;
}

void write_frames(const std::vector<ApsFrame>& frames, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& f : frames) write_pgm(f.image, dir / (std::to_string(f.t_us) + ".pgm"), f.pose_tag);
}

std::vector<ApsFrame> read_frames(const std::filesystem::path& dir, const SensorGeometry& geometry) {
  if (!std::filesystem::is_directory(dir)) throw std::runtime_error(dir.string() + " is not a directory");
  std::vector<ApsFrame> frames;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".pgm") continue;
    ApsFrame f;
    try {
      std::size_t used = 0;
      const std::string stem = entry.path().stem().string();
      f.t_us = std::stoll(stem, &used);
      if (used != stem.size()) throw std::invalid_argument(stem);
    } catch (const std::logic_error&) {
      throw std::runtime_error("frame file name is not a timestamp: " + entry.path().string());
    }
    f.image = read_pgm(entry.path(), &f.pose_tag);
    if (f.image.width != geometry.width || f.image.height != geometry.height)
      throw std::runtime_error("frame size does not match sensor geometry: " + entry.path().string());
    frames.push_back(std::move(f));
  }
  std::sort(frames.begin(), frames.end(),
            [](const ApsFrame& a, const ApsFrame& b) { return a.t_us < b.t_us; });
  return frames;
}

}  // namespace evdn
