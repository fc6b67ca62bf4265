// Procedural, seeded image corruptions: a 13-type manifest at 5 severity
// levels over binary PPM images. Every pipeline is arithmetic-only (counter
// RNG, Irwin-Hall normals, series exp) with one fixed rounding rule, so
// output bytes are identical across platforms and thread counts.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hiker {

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;  // row-major, 3 bytes per pixel

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), pixels(static_cast<size_t>(w) * h * 3, 0) {}

  uint8_t& at(int x, int y, int c) {
    return pixels[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
  uint8_t at(int x, int y, int c) const {
    return pixels[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
  bool operator==(const RgbImage&) const = default;
};

RgbImage load_ppm(const std::string& path);
void save_ppm(const std::string& path, const RgbImage& img);

enum class CorruptionType {
  kGaussianNoise,  // gaus
  kShotNoise,      // shot
  kImpulseNoise,   // imp
  kBrightness,     // brt
  kContrast,       // cnt
  kPixelate,       // px
  kFog,            // fg
  kSunGlare,       // sun
  kWaterDrop,      // wtd
  kSmoke,          // smk
  kRain,           // rain
  kDust,           // dust
  kDefocusBlur,    // dfcs
};

struct CorruptionSpec {
  CorruptionType type = CorruptionType::kGaussianNoise;
  int severity = 3;  // 1..5; 0 is the identity calibration point
  uint64_t seed = 0;
};

// Implemented abbreviation list, and the types listed as unavailable
// (codec- or optics-heavy; intentionally not built).
const std::vector<std::string>& corruption_manifest();
const std::vector<std::string>& corruption_unimplemented();

std::string corruption_abbrev(CorruptionType t);
// Throws for unknown or unimplemented abbreviations, naming the manifest.
CorruptionType corruption_from_abbrev(const std::string& abbrev);

// Deterministic in (image, type, severity, seed); preserves dimensions.
RgbImage corrupt(const RgbImage& img, const CorruptionSpec& spec);

// Mean squared error over all channels, the severity_profile measure.
double image_mse(const RgbImage& a, const RgbImage& b);

// MSE against the clean image for severities 1..5 at a fixed seed.
std::vector<double> severity_profile(const RgbImage& img, CorruptionType type, uint64_t seed);

struct ManifestEntry {
  std::string src;
  std::string dst;
  std::string type;
  int severity = 0;
  uint64_t seed = 0;
  std::string error;  // empty on success
};

// One output per (readable image, spec); per-image seed =
// hash(global seed, filename, type, severity) so scheduling never changes
// bytes. Unreadable inputs become manifest error entries.
std::vector<ManifestEntry> corrupt_dataset(const std::string& input_dir,
                                           const std::string& output_dir,
                                           const std::vector<std::pair<CorruptionType, int>>& specs,
                                           uint64_t global_seed, int jobs);

void save_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);

}  // namespace hiker
