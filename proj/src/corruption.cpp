#include "hiker/corruption.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "hiker/rng.hpp"
#include "json_util.hpp"

namespace hiker {

namespace fs = std::filesystem;

RgbImage load_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open image: " + path);
  std::string magic;
  in >> magic;
  if (magic != "P6") throw std::runtime_error("not a binary PPM (P6): " + path);
  auto next_int = [&]() {
    // Skip whitespace and '#' comment lines between header fields.
    int ch;
    while ((ch = in.peek()) != EOF) {
      if (ch == '#') {
        std::string comment;
        std::getline(in, comment);
      } else if (std::isspace(ch)) {
        in.get();
      } else {
        break;
      }
    }
    int v;
    if (!(in >> v)) throw std::runtime_error("bad PPM header: " + path);
    return v;
  };
  const int w = next_int(), h = next_int(), maxval = next_int();
  if (w <= 0 || h <= 0) throw std::runtime_error("bad PPM dimensions: " + path);
  if (maxval != 255) throw std::runtime_error("PPM maxval must be 255: " + path);
  in.get();  // single whitespace after maxval
  RgbImage img(w, h);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
    throw std::runtime_error("truncated PPM payload: " + path);
  return img;
}

void save_ppm(const std::string& path, const RgbImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write image: " + path);
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
}

namespace {

// Round half away from zero, then clamp to 8 bits. The single rounding rule
// every floating-point stage goes through.
uint8_t quantize(double v) {
  double r = v >= 0.0 ? std::floor(v + 0.5) : std::ceil(v - 0.5);
  if (r < 0.0) r = 0.0;
  if (r > 255.0) r = 255.0;
  return static_cast<uint8_t>(r);
}

// exp(-x) for x >= 0 via series + repeated e^-1 multiplication; identical
// on every platform (no libm).
double exp_neg(double x) {
  if (x < 0.0) throw std::invalid_argument("exp_neg: negative input");
  const int k = static_cast<int>(x);
  const double f = x - k;
  double term = 1.0, sum = 1.0;
  for (int n = 1; n <= 18; ++n) {
    term *= -f / n;
    sum += term;
  }
  constexpr double kInvE = 0.36787944117144232160;
  double scale = 1.0;
  for (int i = 0; i < k; ++i) scale *= kInvE;
  return sum * scale;
}

int poisson(double lambda, Rng& rng) {
  if (lambda <= 0.0) return 0;
  const double limit = exp_neg(lambda);
  int k = 0;
  double p = 1.0;
  do {
    ++k;
    p *= rng.uniform();
  } while (p > limit);
  return k - 1;
}

// Seeded lattice value noise in [0, 1): bilinear interpolation with a
// smoothstep fade between per-cell hash values.
double value_noise(int x, int y, int cell, uint64_t key) {
  auto lattice = [&](int i, int j) {
    uint64_t h = detail::mix64(key ^ detail::mix64(static_cast<uint64_t>(i) * 0x9E3779B97F4A7C15ull ^
                                                   static_cast<uint64_t>(j) + 0x7F4A7C15ull));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
  };
  const int ix = x / cell, iy = y / cell;
  const double fx = static_cast<double>(x % cell) / cell;
  const double fy = static_cast<double>(y % cell) / cell;
  const double ux = fx * fx * (3.0 - 2.0 * fx);
  const double uy = fy * fy * (3.0 - 2.0 * fy);
  const double a = lattice(ix, iy), b = lattice(ix + 1, iy);
  const double c = lattice(ix, iy + 1), d = lattice(ix + 1, iy + 1);
  return (a * (1 - ux) + b * ux) * (1 - uy) + (c * (1 - ux) + d * ux) * uy;
}

using Severity = std::array<double, 6>;  // index by severity, [0] = identity

RgbImage gaussian_noise(const RgbImage& img, int sev, uint64_t seed) {
  static constexpr Severity kSigma = {0, 8, 16, 24, 36, 48};
  Rng rng(seed, 1);
  RgbImage out = img;
  for (size_t i = 0; i < out.pixels.size(); ++i)
    out.pixels[i] = quantize(img.pixels[i] + kSigma[sev] * rng.normal());
  return out;
}

RgbImage shot_noise(const RgbImage& img, int sev, uint64_t seed) {
  static constexpr Severity kScale = {0, 60, 25, 12, 5, 3};
  Rng rng(seed, 2);
  RgbImage out = img;
  const double c = kScale[sev];
  for (size_t i = 0; i < out.pixels.size(); ++i) {
    const double lambda = img.pixels[i] / 255.0 * c;
    out.pixels[i] = quantize(poisson(lambda, rng) / c * 255.0);
  }
  return out;
}

RgbImage impulse_noise(const RgbImage& img, int sev, uint64_t seed) {
  static constexpr Severity kFraction = {0, 0.01, 0.02, 0.04, 0.07, 0.10};
  Rng rng(seed, 3);
  RgbImage out = img;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      // Both draws happen for every pixel, so corrupted sets nest across
      // severities and the severity profile is monotone by construction.
      const double select = rng.uniform();
      const bool salt = rng.uniform() < 0.5;
      if (select >= kFraction[sev]) continue;
      for (int ch = 0; ch < 3; ++ch) out.at(x, y, ch) = salt ? 255 : 0;
    }
  return out;
}

RgbImage brightness(const RgbImage& img, int sev, uint64_t) {
  static constexpr Severity kFactor = {1.0, 1.1, 1.2, 1.35, 1.5, 1.7};
  RgbImage out = img;
  for (size_t i = 0; i < out.pixels.size(); ++i)
    out.pixels[i] = quantize(img.pixels[i] * kFactor[sev]);
  return out;
}

RgbImage contrast(const RgbImage& img, int sev, uint64_t) {
  static constexpr Severity kFactor = {1.0, 0.75, 0.6, 0.45, 0.3, 0.2};
  double mean[3] = {0, 0, 0};
  const size_t n = static_cast<size_t>(img.width) * img.height;
  for (size_t i = 0; i < n; ++i)
    for (int ch = 0; ch < 3; ++ch) mean[ch] += img.pixels[i * 3 + ch];
  for (double& m : mean) m /= static_cast<double>(n);
  RgbImage out = img;
  for (size_t i = 0; i < n; ++i)
    for (int ch = 0; ch < 3; ++ch)
      out.pixels[i * 3 + ch] =
          quantize(mean[ch] + (img.pixels[i * 3 + ch] - mean[ch]) * kFactor[sev]);
  return out;
}

RgbImage pixelate(const RgbImage& img, int sev, uint64_t) {
  static constexpr std::array<int, 6> kBlock = {1, 2, 3, 4, 6, 8};
  const int b = kBlock[sev];
  RgbImage out = img;
  for (int by = 0; by < img.height; by += b)
    for (int bx = 0; bx < img.width; bx += b) {
      const int x_end = std::min(img.width, bx + b), y_end = std::min(img.height, by + b);
      double sum[3] = {0, 0, 0};
      int count = 0;
      for (int y = by; y < y_end; ++y)
        for (int x = bx; x < x_end; ++x) {
          for (int ch = 0; ch < 3; ++ch) sum[ch] += img.at(x, y, ch);
          ++count;
        }
      uint8_t avg[3];
      for (int ch = 0; ch < 3; ++ch) avg[ch] = quantize(sum[ch] / count);
      for (int y = by; y < y_end; ++y)
        for (int x = bx; x < x_end; ++x)
          for (int ch = 0; ch < 3; ++ch) out.at(x, y, ch) = avg[ch];
    }
  return out;
}

RgbImage blend_field(const RgbImage& img, int sev, uint64_t seed, const double tint[3],
                     const Severity& alphas) {
  RgbImage out = img;
  const uint64_t key = detail::mix64(seed ^ 0xF06F06ull);
  const int cell = std::max(2, std::min(img.width, img.height) / 4);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const double field = 0.4 + 0.6 * value_noise(x, y, cell, key);
      const double a = alphas[sev] * field;
      for (int ch = 0; ch < 3; ++ch)
        out.at(x, y, ch) = quantize(img.at(x, y, ch) * (1.0 - a) + tint[ch] * a);
    }
  return out;
}

RgbImage fog(const RgbImage& img, int sev, uint64_t seed) {
  static constexpr Severity kAlpha = {0, 0.2, 0.32, 0.44, 0.56, 0.68};
  const double white[3] = {255, 255, 255};
  return blend_field(img, sev, seed, white, kAlpha);
}

RgbImage smoke(const RgbImage& img, int sev, uint64_t seed) {
  static constexpr Severity kAlpha = {0, 0.22, 0.34, 0.46, 0.58, 0.70};
  const double tint[3] = {205, 150, 105};  // gray-orange haze
  return blend_field(img, sev, seed, tint, kAlpha);
}

RgbImage sun_glare(const RgbImage& img, int sev, uint64_t seed) {
  static constexpr Severity kIntensity = {0, 0.5, 0.65, 0.8, 0.9, 1.0};
  static constexpr Severity kRadius = {0, 0.35, 0.45, 0.55, 0.65, 0.75};
  Rng rng(seed, 4);
  const double cx = rng.uniform(0.2, 0.8) * img.width;
  const double cy = rng.uniform(0.2, 0.8) * img.height;
  const double diag = std::sqrt(static_cast<double>(img.width) * img.width +
                                static_cast<double>(img.height) * img.height);
  const double radius = kRadius[sev] * diag;
  RgbImage out = img;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const double dx = x - cx, dy = y - cy;
      const double dist = std::sqrt(dx * dx + dy * dy);
      const double falloff = std::max(0.0, 1.0 - dist / radius);
      const double add = 255.0 * kIntensity[sev] * falloff * falloff;
      for (int ch = 0; ch < 3; ++ch) out.at(x, y, ch) = quantize(img.at(x, y, ch) + add);
    }
  return out;
}

RgbImage water_drop(const RgbImage& img, int sev, uint64_t seed) {
  Rng rng(seed, 5);
  RgbImage out = img;
  const int count = sev + 1 + static_cast<int>(img.width) * img.height / 6000;
  const int radius =
      std::max(2, static_cast<int>(std::min(img.width, img.height) * (0.10 + 0.04 * sev)));
  for (int drop = 0; drop < count; ++drop) {
    const int cx = rng.index(static_cast<size_t>(img.width));
    const int cy = rng.index(static_cast<size_t>(img.height));
    // Local average inside the circle, then a smudge toward it.
    double sum[3] = {0, 0, 0};
    int n = 0;
    for (int y = std::max(0, cy - radius); y < std::min(img.height, cy + radius + 1); ++y)
      for (int x = std::max(0, cx - radius); x < std::min(img.width, cx + radius + 1); ++x) {
        if ((x - cx) * (x - cx) + (y - cy) * (y - cy) > radius * radius) continue;
        for (int ch = 0; ch < 3; ++ch) sum[ch] += out.at(x, y, ch);
        ++n;
      }
    if (n == 0) continue;
    double avg[3];
    for (int ch = 0; ch < 3; ++ch) avg[ch] = sum[ch] / n;
    for (int y = std::max(0, cy - radius); y < std::min(img.height, cy + radius + 1); ++y)
      for (int x = std::max(0, cx - radius); x < std::min(img.width, cx + radius + 1); ++x) {
        if ((x - cx) * (x - cx) + (y - cy) * (y - cy) > radius * radius) continue;
        for (int ch = 0; ch < 3; ++ch)
          out.at(x, y, ch) = quantize(0.4 * out.at(x, y, ch) + 0.6 * avg[ch]);
      }
  }
  return out;
}

RgbImage rain(const RgbImage& img, int sev, uint64_t seed) {
  Rng rng(seed, 6);
  RgbImage out = img;
  const double area = static_cast<double>(img.width) * img.height;
  const int count = std::max(sev, static_cast<int>(area * 0.0008 * sev));
  const int len = std::max(3, std::min(img.width, img.height) / 2);
  for (int streak = 0; streak < count; ++streak) {
    double x = static_cast<double>(rng.index(static_cast<size_t>(img.width)));
    double y = static_cast<double>(rng.index(static_cast<size_t>(img.height)));
    for (int step = 0; step < len; ++step) {
      const int px = static_cast<int>(x), py = static_cast<int>(y);
      if (px < 0 || px >= img.width || py < 0 || py >= img.height) break;
      for (int ch = 0; ch < 3; ++ch)
        out.at(px, py, ch) = quantize(out.at(px, py, ch) + (255.0 - out.at(px, py, ch)) * 0.55);
      x += 0.5;  // fixed diagonal fall direction
      y += 1.0;
    }
  }
  return out;
}

RgbImage dust(const RgbImage& img, int sev, uint64_t seed) {
  static constexpr Severity kHaze = {0, 0.06, 0.12, 0.18, 0.24, 0.30};
  Rng rng(seed, 7);
  RgbImage out = img;
  const double sepia[3] = {196, 160, 110};
  for (size_t i = 0; i < out.pixels.size(); i += 3)
    for (int ch = 0; ch < 3; ++ch)
      out.pixels[i + ch] =
          quantize(out.pixels[i + ch] * (1.0 - kHaze[sev]) + sepia[ch] * kHaze[sev]);
  const double area = static_cast<double>(img.width) * img.height;
  const int count = std::max(2 * sev, static_cast<int>(area * 0.0006 * sev));
  const int radius = 1 + sev / 3;
  for (int speck = 0; speck < count; ++speck) {
    const int cx = rng.index(static_cast<size_t>(img.width));
    const int cy = rng.index(static_cast<size_t>(img.height));
    for (int y = std::max(0, cy - radius); y < std::min(img.height, cy + radius + 1); ++y)
      for (int x = std::max(0, cx - radius); x < std::min(img.width, cx + radius + 1); ++x) {
        if ((x - cx) * (x - cx) + (y - cy) * (y - cy) > radius * radius) continue;
        for (int ch = 0; ch < 3; ++ch) out.at(x, y, ch) = quantize(out.at(x, y, ch) * 0.25);
      }
  }
  return out;
}

RgbImage defocus_blur(const RgbImage& img, int sev, uint64_t) {
  static constexpr std::array<int, 6> kRadius = {0, 1, 2, 3, 5, 7};
  const int r = kRadius[sev];
  if (r == 0) return img;
  // Disk kernel, edge-clamped convolution.
  std::vector<std::pair<int, int>> offsets;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx)
      if (dx * dx + dy * dy <= r * r) offsets.emplace_back(dx, dy);
  RgbImage out = img;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double sum[3] = {0, 0, 0};
      for (const auto& [dx, dy] : offsets) {
        const int sx = std::clamp(x + dx, 0, img.width - 1);
        const int sy = std::clamp(y + dy, 0, img.height - 1);
        for (int ch = 0; ch < 3; ++ch) sum[ch] += img.at(sx, sy, ch);
      }
      for (int ch = 0; ch < 3; ++ch)
        out.at(x, y, ch) = quantize(sum[ch] / static_cast<double>(offsets.size()));
    }
  return out;
}

struct TypeInfo {
  CorruptionType type;
  const char* abbrev;
  RgbImage (*fn)(const RgbImage&, int, uint64_t);
};

const TypeInfo kTypes[] = {
    {CorruptionType::kGaussianNoise, "gaus", gaussian_noise},
    {CorruptionType::kShotNoise, "shot", shot_noise},
    {CorruptionType::kImpulseNoise, "imp", impulse_noise},
    {CorruptionType::kBrightness, "brt", brightness},
    {CorruptionType::kContrast, "cnt", contrast},
    {CorruptionType::kPixelate, "px", pixelate},
    {CorruptionType::kFog, "fg", fog},
    {CorruptionType::kSunGlare, "sun", sun_glare},
    {CorruptionType::kWaterDrop, "wtd", water_drop},
    {CorruptionType::kSmoke, "smk", smoke},
    {CorruptionType::kRain, "rain", rain},
    {CorruptionType::kDust, "dust", dust},
    {CorruptionType::kDefocusBlur, "dfcs", defocus_blur},
};

}  // namespace

const std::vector<std::string>& corruption_manifest() {
  static const std::vector<std::string> manifest = [] {
    std::vector<std::string> v;
    for (const auto& t : kTypes) v.push_back(t.abbrev);
    return v;
  }();
  return manifest;
}

const std::vector<std::string>& corruption_unimplemented() {
  static const std::vector<std::string> v = {"gls", "mtn", "zm", "snw", "frst", "els", "jpg"};
  return v;
}

std::string corruption_abbrev(CorruptionType t) {
  for (const auto& info : kTypes)
    if (info.type == t) return info.abbrev;
  throw std::logic_error("corruption_abbrev: unknown type");
}

CorruptionType corruption_from_abbrev(const std::string& abbrev) {
  for (const auto& info : kTypes)
    if (abbrev == info.abbrev) return info.type;
  std::string msg = "corruption type '" + abbrev + "' is not implemented; available: ";
  for (const auto& a : corruption_manifest()) msg += a + " ";
  msg += "; listed as unavailable: ";
  for (const auto& a : corruption_unimplemented()) msg += a + " ";
  throw std::invalid_argument(msg);
}

RgbImage corrupt(const RgbImage& img, const CorruptionSpec& spec) {
  if (spec.severity < 0 || spec.severity > 5)
    throw std::invalid_argument("corrupt: severity must be in 0..5 (0 = calibration identity)");
  if (spec.severity == 0) return img;
  for (const auto& info : kTypes)
    if (info.type == spec.type) return info.fn(img, spec.severity, spec.seed);
  throw std::invalid_argument("corrupt: unknown corruption type");
}

double image_mse(const RgbImage& a, const RgbImage& b) {
  if (!(a.width == b.width && a.height == b.height))
    throw std::invalid_argument("image_mse: dimension mismatch");
  double sum = 0.0;
  for (size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = static_cast<double>(a.pixels[i]) - static_cast<double>(b.pixels[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(a.pixels.size());
}

std::vector<double> severity_profile(const RgbImage& img, CorruptionType type, uint64_t seed) {
  std::vector<double> mse(5);
  for (int sev = 1; sev <= 5; ++sev)
    mse[sev - 1] = image_mse(img, corrupt(img, {type, sev, seed}));
  return mse;
}

std::vector<ManifestEntry> corrupt_dataset(const std::string& input_dir,
                                           const std::string& output_dir,
                                           const std::vector<std::pair<CorruptionType, int>>& specs,
                                           uint64_t global_seed, int jobs) {
  std::vector<std::string> inputs;
  for (const auto& entry : fs::directory_iterator(input_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".ppm")
      inputs.push_back(entry.path().string());
  std::sort(inputs.begin(), inputs.end());
  fs::create_directories(output_dir);

  std::vector<ManifestEntry> entries(inputs.size() * specs.size());
  auto process = [&](size_t job_index) {
    const size_t img_idx = job_index / specs.size();
    const auto& [type, severity] = specs[job_index % specs.size()];
    const std::string& src = inputs[img_idx];
    const std::string stem = fs::path(src).stem().string();
    ManifestEntry& e = entries[job_index];
    e.src = src;
    e.type = corruption_abbrev(type);
    e.severity = severity;
    uint64_t h = fnv1a64_u64(global_seed);
    h = fnv1a64(std::string_view(fs::path(src).filename().string()), h);
    h = fnv1a64(std::string_view(e.type), h);
    h = fnv1a64_u64(static_cast<uint64_t>(severity), h);
    e.seed = h;
    e.dst = (fs::path(output_dir) /
             (stem + "_" + e.type + "_s" + std::to_string(severity) + ".ppm"))
                .string();
    try {
      RgbImage img = load_ppm(src);
      save_ppm(e.dst, corrupt(img, {type, severity, e.seed}));
    } catch (const std::exception& ex) {
      e.error = ex.what();
      e.dst.clear();
    }
  };

  const size_t total = entries.size();
  if (jobs <= 1) {
    for (size_t i = 0; i < total; ++i) process(i);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < jobs; ++w)
      pool.emplace_back([&] {
        for (size_t i = next.fetch_add(1); i < total; i = next.fetch_add(1)) process(i);
      });
    for (auto& th : pool) th.join();
  }
  return entries;
}

void save_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest: " + path);
  for (const auto& e : entries) {
    detail::json j;
    j["src"] = e.src;
    j["dst"] = e.dst;
    j["type"] = e.type;
    j["severity"] = e.severity;
    j["seed"] = e.seed;
    if (!e.error.empty()) j["error"] = e.error;
    out << j.dump() << "\n";
  }
}

}  // namespace hiker
