#include "srforge/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numeric>

#include <json.hpp>

#include "srforge/metrics.hpp"
#include "srforge/ops.hpp"
#include "srforge/parallel.hpp"

namespace srforge {

namespace fs = std::filesystem;

void DegradeSpec::validate() const {
  if (kernel.size() == 0 || kernel.rows() % 2 == 0 || kernel.cols() % 2 == 0) {
    throw InvalidArgument("degrade: kernel must be non-empty with odd extents");
  }
  if ((kernel.array() < 0.0).any() || !kernel.allFinite()) {
    throw InvalidArgument("degrade: kernel entries must be finite and nonnegative");
  }
  if (std::abs(kernel.sum() - 1.0) > 1e-9) {
    throw InvalidArgument("degrade: kernel must sum to 1 (got " + std::to_string(kernel.sum()) + ")");
  }
  if (scale < 2 || scale > 4) throw InvalidArgument("degrade: scale must be 2, 3 or 4");
  if (!(noise_sigma >= 0.0 && noise_sigma <= 1.0)) throw InvalidArgument("degrade: noise_sigma must lie in [0, 1]");
}

Eigen::MatrixXd gaussian_kernel(double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InvalidArgument("gaussian_kernel: sigma must be >= 0");
  if (sigma == 0.0) return Eigen::MatrixXd::Ones(1, 1);
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  Eigen::VectorXd g(2 * r + 1);
  for (int i = -r; i <= r; ++i) g[i + r] = std::exp(-(i * i) / (2.0 * sigma * sigma));
  g /= g.sum();
  return g * g.transpose();
}

namespace {

// Reflect without repeating the edge sample: -1 -> 1, n -> n - 2.
int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace

Tensorf blur_reflect(const Tensorf& image, const Eigen::MatrixXd& kernel) {
  const int rh = static_cast<int>(kernel.rows()) / 2;
  const int rw = static_cast<int>(kernel.cols()) / 2;
  const Shape s = image.shape();
  Tensorf out(s);
  parallel_for(static_cast<std::size_t>(s.n) * s.c, [&](std::size_t p) {
    const int n = static_cast<int>(p) / s.c;
    const int c = static_cast<int>(p) % s.c;
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x) {
        double acc = 0.0;
        for (int u = -rh; u <= rh; ++u)
          for (int v = -rw; v <= rw; ++v) {
            acc += kernel(u + rh, v + rw) * image(n, c, reflect(y - u, s.h), reflect(x - v, s.w));
          }
        out(n, c, y, x) = static_cast<float>(acc);
      }
  });
  return out;
}

Tensorf degrade(const Tensorf& hr, const DegradeSpec& spec) {
  spec.validate();
  if (hr.h() % spec.scale != 0 || hr.w() % spec.scale != 0 || hr.h() == 0 || hr.w() == 0) {
    throw InvalidArgument("degrade: image " + to_string(hr.shape()) + " not divisible by scale " +
                          std::to_string(spec.scale));
  }
  const Tensorf blurred = blur_reflect(hr, spec.kernel);
  Tensord lr = bicubic_resize(blurred.cast<double>(), hr.h() / spec.scale, hr.w() / spec.scale);
  Rng rng(spec.rng_seed);
  for (Eigen::Index i = 0; i < lr.size(); ++i) {
    double v = lr.values()[i];
    if (spec.noise_sigma > 0.0) v += spec.noise_sigma * rng.normal();
    lr.values()[i] = std::clamp(v, 0.0, 1.0);
  }
  return lr.cast<float>();
}

int ImagePair::scale() const {
  if (lr.n() != hr.n() || lr.c() != hr.c() || lr.h() <= 0 || lr.w() <= 0 || hr.h() % lr.h() != 0 ||
      hr.w() % lr.w() != 0 || hr.h() / lr.h() != hr.w() / lr.w()) {
    throw InvalidArgument("pair " + id + ": hr " + to_string(hr.shape()) + " is not an integer multiple of lr " +
                          to_string(lr.shape()));
  }
  return hr.h() / lr.h();
}

NccFilterResult ncc_filter(std::vector<ImagePair> pairs, double threshold) {
  std::vector<std::string> reasons(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t i) {
    ImagePair& p = pairs[i];
    try {
      p.scale();
      p.ncc_score = ncc(p.lr.cast<double>(), p.hr.cast<double>());
      if (!(p.ncc_score >= threshold)) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "ncc %.6f below threshold %.6f", p.ncc_score, threshold);
        reasons[i] = buf;
      }
    } catch (const std::exception& e) {
      p.ncc_score = std::numeric_limits<double>::quiet_NaN();
      reasons[i] = e.what();
    }
  });
  NccFilterResult result;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (reasons[i].empty()) {
      result.kept.push_back(std::move(pairs[i]));
    } else {
      result.rejected.push_back({std::move(pairs[i]), std::move(reasons[i])});
    }
  }
  return result;
}

PatchPair crop_pair(const ImagePair& pair, int lr_patch, int y, int x, int transform) {
  const int s = pair.scale();
  if (lr_patch <= 0 || lr_patch > pair.lr.h() || lr_patch > pair.lr.w()) {
    throw InvalidArgument("crop: patch " + std::to_string(lr_patch) + " does not fit lr image " +
                          to_string(pair.lr.shape()));
  }
  if (y < 0 || x < 0 || y + lr_patch > pair.lr.h() || x + lr_patch > pair.lr.w()) {
    throw InvalidArgument("crop: offset out of range");
  }
  return {dihedral(crop(pair.lr, y, x, lr_patch, lr_patch), transform),
          dihedral(crop(pair.hr, s * y, s * x, s * lr_patch, s * lr_patch), transform)};
}

PatchPair random_crop_aug(const ImagePair& pair, int lr_patch, Rng& rng) {
  pair.scale();
  if (lr_patch <= 0 || lr_patch > pair.lr.h() || lr_patch > pair.lr.w()) {
    throw InvalidArgument("crop: patch " + std::to_string(lr_patch) + " does not fit lr image " +
                          to_string(pair.lr.shape()));
  }
  const int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(pair.lr.h() - lr_patch + 1)));
  const int x = static_cast<int>(rng.below(static_cast<std::uint64_t>(pair.lr.w() - lr_patch + 1)));
  const int t = static_cast<int>(rng.below(8));
  return crop_pair(pair, lr_patch, y, x, t);
}

// ---- PPM ----

std::vector<std::uint8_t> encode_ppm(const Tensorf& image) {
  if (image.n() != 1 || image.c() != 3 || image.h() <= 0 || image.w() <= 0) {
    throw InvalidArgument("ppm: expected a (1,3,h,w) image, got " + to_string(image.shape()));
  }
  const std::string header = "P6\n" + std::to_string(image.w()) + " " + std::to_string(image.h()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + static_cast<std::size_t>(image.size()));
  for (int y = 0; y < image.h(); ++y)
    for (int x = 0; x < image.w(); ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = image(0, c, y, x);
        if (!std::isfinite(v)) throw InvalidArgument("ppm: non-finite pixel value");
        out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
      }
  return out;
}

namespace {

class PpmHeader {
 public:
  explicit PpmHeader(const std::vector<std::uint8_t>& b) : b_(b) {}

  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n' && b_[pos_] != '\r') ++pos_;
      } else if (std::isspace(b_[pos_])) {
        ++pos_;
      } else {
        return;
      }
    }
  }

  long number(const char* field) {
    skip_space_and_comments();
    if (pos_ >= b_.size()) throw ParseError(ParseError::Kind::Truncated, std::string("ppm: missing ") + field);
    if (!std::isdigit(b_[pos_])) throw ParseError(ParseError::Kind::BadHeader, std::string("ppm: bad ") + field);
    long v = 0;
    while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
      v = v * 10 + (b_[pos_++] - '0');
      if (v > (1L << 24)) throw ParseError(ParseError::Kind::BadHeader, std::string("ppm: ") + field + " too large");
    }
    return v;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  void end_of_header() {
    if (pos_ >= b_.size()) throw ParseError(ParseError::Kind::Truncated, "ppm: header ends before raster");
    if (!std::isspace(b_[pos_])) throw ParseError(ParseError::Kind::BadHeader, "ppm: malformed maxval");
    ++pos_;
  }

  std::size_t pos() const { return pos_; }

 private:
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 2;
};

}  // namespace

Tensorf decode_ppm(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
    throw ParseError(ParseError::Kind::BadMagic, "ppm: missing P6 magic");
  }
  PpmHeader header(bytes);
  const long w = header.number("width");
  const long h = header.number("height");
  const long maxval = header.number("maxval");
  if (w <= 0 || h <= 0) throw ParseError(ParseError::Kind::BadHeader, "ppm: zero image extent");
  if (maxval != 255) {
    throw ParseError(ParseError::Kind::BadValue, "ppm: maxval " + std::to_string(maxval) + " unsupported (need 255)");
  }
  header.end_of_header();
  const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3;
  if (bytes.size() - header.pos() < need) {
    throw ParseError(ParseError::Kind::Truncated, "ppm: raster has " + std::to_string(bytes.size() - header.pos()) +
                                                      " of " + std::to_string(need) + " bytes");
  }
  Tensorf out({1, 3, static_cast<int>(h), static_cast<int>(w)});
  const std::uint8_t* p = bytes.data() + header.pos();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) out(0, c, y, x) = static_cast<float>(*p++ / 255.0);
  return out;
}

void save_ppm(const Tensorf& image, const fs::path& path) {
  const std::vector<std::uint8_t> bytes = encode_ppm(image);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("failed writing " + path.string());
}

Tensorf load_ppm(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  try {
    return decode_ppm(bytes);
  } catch (const ParseError& e) {
    throw ParseError(e.kind(), path.string() + ": " + e.what());
  }
}

// ---- manifest ----

std::size_t DatasetManifest::count(const std::string& split) const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [&](const ManifestEntry& e) { return split.empty() || e.split == split; }));
}

std::vector<ImagePair> DatasetManifest::load_pairs(const std::string& split) const {
  std::vector<const ManifestEntry*> chosen;
  for (const auto& e : entries)
    if (split.empty() || e.split == split) chosen.push_back(&e);
  std::vector<ImagePair> pairs(chosen.size());
  parallel_for(chosen.size(), [&](std::size_t i) {
    const ManifestEntry& e = *chosen[i];
    pairs[i] = {e.id, load_ppm(root / e.lr_path), load_ppm(root / e.hr_path), e.ncc};
    if (pairs[i].scale() != e.scale) {
      throw InvalidArgument("pair " + e.id + ": image sizes disagree with manifest scale " + std::to_string(e.scale));
    }
  });
  return pairs;
}

void save_manifest(const DatasetManifest& manifest) {
  const fs::path file = manifest.root / "manifest.jsonl";
  std::ofstream f(file);
  if (!f) throw IoError("cannot open " + file.string() + " for writing");
  for (const auto& e : manifest.entries) {
    nlohmann::ordered_json j;
    j["id"] = e.id;
    j["lr_path"] = e.lr_path;
    j["hr_path"] = e.hr_path;
    j["scale"] = e.scale;
    j["split"] = e.split;
    j["ncc"] = e.ncc;
    f << j.dump() << '\n';
  }
  if (!f) throw IoError("failed writing " + file.string());
}

DatasetManifest load_manifest(const fs::path& manifest_file) {
  std::ifstream f(manifest_file);
  if (!f) throw IoError("cannot open " + manifest_file.string());
  DatasetManifest m;
  m.root = manifest_file.parent_path();
  std::string line;
  int line_no = 0;
  std::vector<std::string> seen;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = manifest_file.string() + ":" + std::to_string(line_no) + ": ";
    try {
      const auto j = nlohmann::json::parse(line);
      ManifestEntry e{j.at("id").get<std::string>(),   j.at("lr_path").get<std::string>(),
                      j.at("hr_path").get<std::string>(), j.at("scale").get<int>(),
                      j.at("split").get<std::string>(),  j.value("ncc", 0.0)};
      if (e.split != "train" && e.split != "val") {
        throw ParseError(ParseError::Kind::BadValue, "split must be train or val");
      }
      m.entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(ParseError::Kind::BadValue, where + ex.what());
    } catch (const ParseError& ex) {
      throw ParseError(ex.kind(), where + ex.what());
    }
    seen.push_back(m.entries.back().id);
  }
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
    throw ParseError(ParseError::Kind::BadValue, manifest_file.string() + ": duplicate pair id");
  }
  return m;
}

// ---- procedural images ----

namespace {

struct Rgb {
  double v[3];
};

Rgb random_color(Rng& rng) { return {{rng.uniform(), rng.uniform(), rng.uniform()}}; }

// Linear ramp of `softness` pixels across the boundary.
double smooth_coverage(double signed_distance, double softness) {
  return std::clamp(0.5 - signed_distance / softness, 0.0, 1.0);
}

double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double dx = bx - ax;
  const double dy = by - ay;
  const double len2 = dx * dx + dy * dy;
  const double t = len2 > 0 ? std::clamp(((px - ax) * dx + (py - ay) * dy) / len2, 0.0, 1.0) : 0.0;
  return std::hypot(px - ax - t * dx, py - ay - t * dy);
}

// Edge ramps of 2-4 px and strokes at least 2 px wide keep aligned pairs
// above the 0.99 NCC gate under the default blur; 1 px edges fall below it.
constexpr double kEdgeSoftMin = 2.0, kEdgeSoftMax = 4.0;
constexpr double kStrokeMin = 1.2, kStrokeMax = 3.0;  // half widths
constexpr double kGlyphMin = 1.0, kGlyphMax = 2.0;

void blend(Tensord& img, int y, int x, const Rgb& color, double alpha) {
  if (alpha <= 0.0) return;
  for (int c = 0; c < 3; ++c) img(0, c, y, x) = (1 - alpha) * img(0, c, y, x) + alpha * color.v[c];
}

}  // namespace

Tensorf procedural_image(int height, int width, std::uint64_t seed) {
  if (height <= 0 || width <= 0) throw InvalidArgument("procedural_image: extents must be positive");
  Rng rng(seed);
  Tensord img({1, 3, height, width});
  const double size = std::min(height, width);

  // Linear gradient background.
  const Rgb c0 = random_color(rng);
  const Rgb c1 = random_color(rng);
  const double angle = rng.uniform(0, 2 * 3.14159265358979323846);
  const double gx = std::cos(angle) / width;
  const double gy = std::sin(angle) / height;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double t = std::clamp(0.5 + (x - width / 2.0) * gx + (y - height / 2.0) * gy, 0.0, 1.0);
      for (int c = 0; c < 3; ++c) img(0, c, y, x) = (1 - t) * c0.v[c] + t * c1.v[c];
    }

  // Filled discs and rotated boxes.
  const int shapes = 3 + static_cast<int>(rng.below(4));
  for (int k = 0; k < shapes; ++k) {
    const Rgb color = random_color(rng);
    const double alpha = rng.uniform(0.6, 1.0);
    const double cx = rng.uniform(0, width);
    const double cy = rng.uniform(0, height);
    const bool disc = rng.uniform() < 0.5;
    const double a = rng.uniform(0.05, 0.25) * size;
    const double b = rng.uniform(0.05, 0.25) * size;
    const double rot = rng.uniform(0, 3.14159265358979323846);
    const double softness = rng.uniform(kEdgeSoftMin, kEdgeSoftMax);
    const double cr = std::cos(rot);
    const double sr = std::sin(rot);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const double px = x + 0.5 - cx;
        const double py = y + 0.5 - cy;
        double sd;
        if (disc) {
          sd = std::hypot(px, py) - a;
        } else {
          const double qx = std::abs(cr * px + sr * py) - a;
          const double qy = std::abs(-sr * px + cr * py) - b;
          sd = std::hypot(std::max(qx, 0.0), std::max(qy, 0.0)) + std::min(std::max(qx, qy), 0.0);
        }
        blend(img, y, x, color, alpha * smooth_coverage(sd, softness));
      }
  }

  // Long strokes and glyph-like clusters of short strokes.
  struct Segment {
    double ax, ay, bx, by, half_width, softness;
  };
  std::vector<Segment> segments;
  const int strokes = 2 + static_cast<int>(rng.below(3));
  for (int k = 0; k < strokes; ++k) {
    segments.push_back({rng.uniform(0, width), rng.uniform(0, height), rng.uniform(0, width),
                        rng.uniform(0, height), rng.uniform(kStrokeMin, kStrokeMax),
                        rng.uniform(kEdgeSoftMin, kEdgeSoftMax)});
  }
  const int glyphs = 2 + static_cast<int>(rng.below(4));
  for (int k = 0; k < glyphs; ++k) {
    const double gx0 = rng.uniform(0, width * 0.85);
    const double gy0 = rng.uniform(0, height * 0.85);
    const double box = rng.uniform(0.06, 0.14) * size;
    const double hw = rng.uniform(kGlyphMin, kGlyphMax);
    const double softness = rng.uniform(kEdgeSoftMin, kEdgeSoftMax);
    const int parts = 2 + static_cast<int>(rng.below(3));
    for (int p = 0; p < parts; ++p) {
      segments.push_back({gx0 + rng.uniform(0, box), gy0 + rng.uniform(0, box), gx0 + rng.uniform(0, box),
                          gy0 + rng.uniform(0, box), hw, softness});
    }
  }
  for (const Segment& s : segments) {
    const Rgb color = random_color(rng);
    const int y0 = std::max(0, static_cast<int>(std::min(s.ay, s.by) - s.half_width - s.softness - 2));
    const int y1 = std::min(height, static_cast<int>(std::max(s.ay, s.by) + s.half_width + s.softness + 3));
    const int x0 = std::max(0, static_cast<int>(std::min(s.ax, s.bx) - s.half_width - s.softness - 2));
    const int x1 = std::min(width, static_cast<int>(std::max(s.ax, s.bx) + s.half_width + s.softness + 3));
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) {
        const double d = segment_distance(x + 0.5, y + 0.5, s.ax, s.ay, s.bx, s.by) - s.half_width;
        blend(img, y, x, color, smooth_coverage(d, s.softness));
      }
  }

  // Smooth value-noise texture.
  const int cells = 4 + static_cast<int>(rng.below(7));
  const double amplitude = rng.uniform(0.03, 0.12);
  Tensord coarse({1, 3, cells, cells});
  for (Eigen::Index i = 0; i < coarse.size(); ++i) coarse.values()[i] = rng.uniform(-amplitude, amplitude);
  const Tensord texture = bicubic_resize(coarse, height, width);
  img.values() += texture.values();
  for (Eigen::Index i = 0; i < img.size(); ++i) img.values()[i] = std::clamp(img.values()[i], 0.0, 1.0);
  return img.cast<float>();
}

DatasetManifest make_synthetic_dataset(const SyntheticOptions& options, const fs::path& out_dir) {
  options.spec.validate();
  if (options.count < 0) throw InvalidArgument("make_synthetic_dataset: count must be >= 0");
  if (options.hr_size <= 0 || options.hr_size % options.spec.scale != 0) {
    throw InvalidArgument("make_synthetic_dataset: hr_size must be a positive multiple of the scale");
  }
  if (!(options.val_fraction >= 0.0 && options.val_fraction <= 1.0)) {
    throw InvalidArgument("make_synthetic_dataset: val_fraction must lie in [0, 1]");
  }
  std::error_code ec;
  fs::create_directories(out_dir / "pairs", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "pairs").string() + ": " + ec.message());

  DatasetManifest manifest;
  manifest.root = out_dir;
  manifest.entries.resize(static_cast<std::size_t>(options.count));
  parallel_for(manifest.entries.size(), [&](std::size_t i) {
    char id[32];
    std::snprintf(id, sizeof id, "pair_%04zu", i);
    const std::uint64_t pair_seed = derive_seed(options.seed, hash_string(id));
    const Tensorf hr = procedural_image(options.hr_size, options.hr_size, derive_seed(pair_seed, 1));
    DegradeSpec spec = options.spec;
    spec.rng_seed = derive_seed(pair_seed, 2);
    const Tensorf lr = degrade(hr, spec);
    ManifestEntry& e = manifest.entries[i];
    e.id = id;
    e.lr_path = "pairs/" + e.id + "_lr.ppm";
    e.hr_path = "pairs/" + e.id + "_hr.ppm";
    e.scale = spec.scale;
    // Score what is on disk, after 8-bit quantisation.
    const fs::path lr_file = out_dir / e.lr_path;
    const fs::path hr_file = out_dir / e.hr_path;
    save_ppm(lr, lr_file);
    save_ppm(hr, hr_file);
    try {
      e.ncc = ncc(load_ppm(lr_file).cast<double>(), load_ppm(hr_file).cast<double>());
    } catch (const DegenerateInput&) {
      e.ncc = 0.0;
    }
  });

  // Holdout: ids ranked by a seeded hash; the lowest ranks become validation.
  std::vector<std::size_t> order(manifest.entries.size());
  std::iota(order.begin(), order.end(), 0);
  auto key = [&](std::size_t i) { return derive_seed(mix64(options.seed), hash_string(manifest.entries[i].id)); };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ka = key(a);
    const auto kb = key(b);
    return ka != kb ? ka < kb : a < b;
  });
  const auto val_count = static_cast<std::size_t>(std::lround(options.count * options.val_fraction));
  for (std::size_t r = 0; r < order.size(); ++r) manifest.entries[order[r]].split = r < val_count ? "val" : "train";
  save_manifest(manifest);
  return manifest;
}

}  // namespace srforge
