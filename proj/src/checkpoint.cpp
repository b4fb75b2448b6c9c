#include "smooth/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "smooth/error.hpp"

namespace smooth {

namespace {

constexpr char kMagic[4] = {'S', 'M', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

void put_u8(std::string& out, std::uint8_t v) { out.push_back(static_cast<char>(v)); }

void put_tensor(std::string& out, const Tensor& t) {
  put_u32(out, static_cast<std::uint32_t>(t.ndim()));
  for (std::size_t d : t.shape) put_u64(out, d);
  for (double v : t.data) put_f64(out, v);
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : b_(bytes) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }

  std::uint32_t u32() {
    const char* p = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
  }

  std::uint64_t u64() {
    const char* p = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
  }

  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }

  Tensor tensor() {
    const std::uint32_t nd = u32();
    if (nd > 8) throw ParseError("checkpoint: tensor rank " + std::to_string(nd) + " too large");
    std::vector<std::size_t> shape(nd);
    for (auto& d : shape) d = static_cast<std::size_t>(u64());
    const std::size_t n = shape_numel(shape);
    std::vector<double> data(n);
    for (auto& v : data) v = f64();
    return Tensor(std::move(shape), std::move(data));
  }

  bool done() const { return pos_ == b_.size(); }

 private:
  const char* take(std::size_t n) {
    if (pos_ + n > b_.size())
      throw ParseError("checkpoint: truncated at offset " + std::to_string(pos_));
    const char* p = b_.data() + pos_;
    pos_ += n;
    return p;
  }

  const std::string& b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_model(const Model& m) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(m.input_shape.size()));
  for (std::size_t d : m.input_shape) put_u64(out, d);
  put_f64(out, m.domain_lo);
  put_f64(out, m.domain_hi);
  put_u32(out, static_cast<std::uint32_t>(m.layers.size()));
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const LayerSpec& l = m.layers[i];
    put_u8(out, static_cast<std::uint8_t>(l.kind));
    switch (l.kind) {
      case LayerKind::Dense:
        put_u64(out, l.in);
        put_u64(out, l.out);
        break;
      case LayerKind::Conv2D:
        put_u64(out, l.in_ch);
        put_u64(out, l.out_ch);
        put_u64(out, l.kernel);
        put_u64(out, l.stride);
        put_u64(out, l.pad);
        break;
      case LayerKind::AvgPool:
        put_u64(out, l.window);
        break;
      case LayerKind::ReLU:
      case LayerKind::Flatten:
        break;
    }
    if (l.has_params()) {
      put_tensor(out, l.weight);
      put_tensor(out, l.bias);
    }
    const NoiseSpec n = i < m.noise.size() ? m.noise[i] : NoiseSpec{};
    put_u8(out, n.enabled ? 1 : 0);
    put_u8(out, static_cast<std::uint8_t>(n.target));
    put_f64(out, n.base_sigma);
    put_f64(out, n.alpha);
    put_u8(out, n.learnable ? 1 : 0);
  }
  return out;
}

Model deserialize_model(const std::string& bytes) {
  Reader r(bytes);
  char magic[4];
  for (auto& c : magic) c = static_cast<char>(r.u8());
  if (std::memcmp(magic, kMagic, 4) != 0) throw ParseError("checkpoint: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw ParseError("checkpoint: unsupported format version " + std::to_string(version));

  Model m;
  const std::uint32_t nd = r.u32();
  m.input_shape.resize(nd);
  for (auto& d : m.input_shape) d = static_cast<std::size_t>(r.u64());
  m.domain_lo = r.f64();
  m.domain_hi = r.f64();
  const std::uint32_t nl = r.u32();
  for (std::uint32_t i = 0; i < nl; ++i) {
    const auto kind = static_cast<LayerKind>(r.u8());
    LayerSpec l;
    switch (kind) {
      case LayerKind::Dense: {
        const std::size_t in = static_cast<std::size_t>(r.u64());
        const std::size_t out = static_cast<std::size_t>(r.u64());
        l = LayerSpec::dense(in, out);
        break;
      }
      case LayerKind::Conv2D: {
        const std::size_t ic = static_cast<std::size_t>(r.u64());
        const std::size_t oc = static_cast<std::size_t>(r.u64());
        const std::size_t k = static_cast<std::size_t>(r.u64());
        const std::size_t s = static_cast<std::size_t>(r.u64());
        const std::size_t p = static_cast<std::size_t>(r.u64());
        l = LayerSpec::conv2d(ic, oc, k, s, p);
        break;
      }
      case LayerKind::AvgPool:
        l = LayerSpec::avg_pool(static_cast<std::size_t>(r.u64()));
        break;
      case LayerKind::ReLU:
        l = LayerSpec::relu();
        break;
      case LayerKind::Flatten:
        l = LayerSpec::flatten();
        break;
      default:
        throw ParseError("checkpoint: unknown layer kind");
    }
    if (l.has_params()) {
      l.weight = r.tensor();
      l.bias = r.tensor();
    }
    NoiseSpec n;
    n.enabled = r.u8() != 0;
    n.target = static_cast<NoiseTarget>(r.u8());
    n.base_sigma = r.f64();
    n.alpha = r.f64();
    n.learnable = r.u8() != 0;
    m.layers.push_back(std::move(l));
    m.noise.push_back(n);
  }
  if (!r.done()) throw ParseError("checkpoint: trailing bytes");
  m.validate();
  return m;
}

void save_model(const Model& m, const std::string& path) {
  const std::string bytes = serialize_model(m);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("checkpoint: cannot open " + tmp + " for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw ConfigError("checkpoint: write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Model load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("checkpoint: cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return deserialize_model(ss.str());
}

}  // namespace smooth
