#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "srforge/models.hpp"

namespace srforge {
namespace {

constexpr char kMagic[4] = {'S', 'R', 'F', 'W'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}

  void need(std::size_t n, const char* what) const {
    if (in_.size() - pos_ < n) {
      throw ParseError(ParseError::Kind::Truncated,
                       std::string("weights file truncated while reading ") + what);
    }
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return in_[pos_++];
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  std::string str(const char* what) {
    const std::uint32_t len = u32(what);
    need(len, what);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), len);
    pos_ += len;
    return s;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  bool done() const { return pos_ == in_.size(); }

 private:
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_weights(const Modelf& model) {
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.u32(kVersion);
  w.u8(static_cast<std::uint8_t>(kind_of(model.config())));
  w.str(config_to_json(model.config()).dump());
  const auto params = model.parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    w.str(p->name);
    w.u8(4);
    const Shape s = p->value.shape();
    for (int d : {s.n, s.c, s.h, s.w}) w.u32(static_cast<std::uint32_t>(d));
    for (Eigen::Index i = 0; i < p->value.size(); ++i) w.f32(p->value.values()[i]);
  }
  return w.take();
}

Modelf decode_weights(const std::vector<std::uint8_t>& bytes) {
  using Kind = ParseError::Kind;
  Reader r(bytes);
  r.need(4, "magic");
  char magic[4];
  for (char& ch : magic) ch = static_cast<char>(r.u8("magic"));
  if (std::memcmp(magic, kMagic, 4) != 0) throw ParseError(Kind::BadMagic, "not an SRFW weights file");
  const std::uint32_t version = r.u32("version");
  if (version != kVersion) {
    throw ParseError(Kind::BadVersion, "unsupported weights version " + std::to_string(version));
  }
  const std::uint8_t kind = r.u8("config kind");
  if (kind > 1) throw ParseError(Kind::BadHeader, "unknown config kind " + std::to_string(kind));
  const std::string blob = r.str("config");

  ModelConfig config;
  try {
    config = config_from_json(static_cast<ModelKind>(kind), nlohmann::json::parse(blob));
    validate(config);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(Kind::BadHeader, std::string("invalid config blob: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ParseError(Kind::BadHeader, std::string("invalid config: ") + e.what());
  }

  Modelf model(config, 0);
  auto params = model.parameters();
  const std::uint32_t count = r.u32("tensor count");
  if (count != params.size()) {
    throw ParseError(Kind::ShapeMismatch, "tensor count " + std::to_string(count) +
                                              " does not match architecture (" +
                                              std::to_string(params.size()) + ")");
  }
  for (auto* p : params) {
    const std::string name = r.str("tensor name");
    if (name != p->name) {
      throw ParseError(Kind::ShapeMismatch, "expected tensor '" + p->name + "', found '" + name + "'");
    }
    if (r.u8("ndim") != 4) throw ParseError(Kind::BadHeader, "tensor '" + name + "' is not 4-D");
    Shape s;
    s.n = static_cast<int>(r.u32("dims"));
    s.c = static_cast<int>(r.u32("dims"));
    s.h = static_cast<int>(r.u32("dims"));
    s.w = static_cast<int>(r.u32("dims"));
    if (s != p->value.shape()) {
      throw ParseError(Kind::ShapeMismatch, "tensor '" + name + "' has shape " + to_string(s) +
                                                ", expected " + to_string(p->value.shape()));
    }
    r.need(static_cast<std::size_t>(s.size()) * 4, "tensor data");
    for (Eigen::Index i = 0; i < s.size(); ++i) p->value.values()[i] = r.f32("tensor data");
  }
  if (!r.done()) throw ParseError(Kind::BadHeader, "trailing bytes after last tensor");
  return model;
}

void save_weights(const Modelf& model, const std::filesystem::path& path) {
  const auto bytes = encode_weights(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

Modelf load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_weights(bytes);
}

}  // namespace srforge
