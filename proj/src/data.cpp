#include "smooth/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "smooth/error.hpp"
#include "smooth/rng.hpp"

namespace smooth {

std::vector<std::size_t> Dataset::example_shape() const {
  return std::vector<std::size_t>(x.shape.begin() + 1, x.shape.end());
}

Tensor Dataset::example(std::size_t i) const {
  const std::size_t per = x.numel() / size();
  std::vector<std::size_t> s{1};
  const auto es = example_shape();
  s.insert(s.end(), es.begin(), es.end());
  Tensor t(s);
  std::copy(x.data.begin() + i * per, x.data.begin() + (i + 1) * per, t.data.begin());
  return t;
}

Dataset Dataset::subset(const std::vector<std::size_t>& idx) const {
  const std::size_t per = size() ? x.numel() / size() : 0;
  std::vector<std::size_t> s = x.shape;
  s[0] = idx.size();
  Dataset out;
  out.x = Tensor(s);
  out.y.reserve(idx.size());
  out.classes = classes;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    std::copy(x.data.begin() + idx[k] * per, x.data.begin() + (idx[k] + 1) * per,
              out.x.data.begin() + k * per);
    out.y.push_back(y[idx[k]]);
  }
  return out;
}

std::string data_source_name(DataSource s) {
  switch (s) {
    case DataSource::Blobs: return "blobs";
    case DataSource::Moons: return "moons";
    case DataSource::MiniDigits: return "mini_digits";
    case DataSource::Csv: return "csv";
    case DataSource::Idx: return "idx";
  }
  return "?";
}

DataSource data_source_from_name(const std::string& name) {
  if (name == "blobs") return DataSource::Blobs;
  if (name == "moons") return DataSource::Moons;
  if (name == "mini_digits") return DataSource::MiniDigits;
  if (name == "csv") return DataSource::Csv;
  if (name == "idx") return DataSource::Idx;
  throw ConfigError("unknown dataset source '" + name + "'");
}

void DatasetSpec::validate() const {
  if (test_fraction < 0.0 || test_fraction >= 1.0)
    throw ConfigError("dataset: test_fraction must be in [0,1)");
  switch (source) {
    case DataSource::Blobs:
      if (classes < 2 || dim == 0 || n < classes)
        throw ConfigError("dataset: blobs needs classes>=2, dim>=1, n>=classes");
      break;
    case DataSource::Moons:
      if (n < 2) throw ConfigError("dataset: moons needs n>=2");
      break;
    case DataSource::MiniDigits:
      if (n < 10) throw ConfigError("dataset: mini_digits needs n>=10");
      break;
    case DataSource::Csv:
      if (csv_path.empty()) throw ConfigError("dataset: csv source needs dataset.csv_path");
      break;
    case DataSource::Idx:
      if (idx_images.empty() || idx_labels.empty())
        throw ConfigError("dataset: idx source needs dataset.idx_images and dataset.idx_labels");
      break;
  }
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  // Fisher-Yates on counter-based draws.
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng::below(seed, i, i));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

namespace {

void minmax_normalize(Tensor& x, std::size_t features, bool only_if_out_of_range = false) {
  const std::size_t n = x.shape[0];
  if (n == 0) return;
  for (std::size_t f = 0; f < features; ++f) {
    double lo = x.data[f], hi = x.data[f];
    for (std::size_t i = 0; i < n; ++i) {
      lo = std::min(lo, x.data[i * features + f]);
      hi = std::max(hi, x.data[i * features + f]);
    }
    if (only_if_out_of_range && lo >= 0.0 && hi <= 1.0) continue;
    const double range = hi - lo;
    for (std::size_t i = 0; i < n; ++i) {
      double& v = x.data[i * features + f];
      v = range > 0.0 ? (v - lo) / range : 0.0;
    }
  }
}

}  // namespace

Dataset make_blobs(std::size_t classes, std::size_t dim, double separation, std::size_t n,
                   std::uint64_t seed) {
  // Class centers: random unit directions rescaled until pairwise distance
  // >= separation (points get unit Gaussian spread around them).
  const std::uint64_t ckey = rng::derive(seed, 0xB10B, 0);
  std::vector<double> centers(classes * dim);
  std::size_t attempt = 0;
  while (true) {
    for (std::size_t k = 0; k < classes; ++k) {
      double norm = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double g = rng::gaussian(rng::derive(ckey, attempt, k), d);
        centers[k * dim + d] = g;
        norm += g * g;
      }
      norm = std::sqrt(norm);
      if (norm == 0.0) norm = 1.0;
      for (std::size_t d = 0; d < dim; ++d)
        centers[k * dim + d] *= separation / norm;
    }
    double min_dist = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < classes; ++a)
      for (std::size_t b = a + 1; b < classes; ++b) {
        double d2 = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
          const double diff = centers[a * dim + d] - centers[b * dim + d];
          d2 += diff * diff;
        }
        min_dist = std::min(min_dist, std::sqrt(d2));
      }
    if (min_dist >= separation || attempt > 64) break;
    ++attempt;
  }

  Dataset ds;
  ds.classes = classes;
  ds.x = Tensor({n, dim});
  ds.y.resize(n);
  const std::uint64_t pkey = rng::derive(seed, 0xB10B, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = i % classes;
    ds.y[i] = static_cast<int>(k);
    for (std::size_t d = 0; d < dim; ++d) {
      ds.x.data[i * dim + d] =
          centers[k * dim + d] + rng::gaussian(rng::derive(pkey, i), d);
    }
  }
  minmax_normalize(ds.x, dim);
  return ds;
}

Dataset make_moons(std::size_t n, double noise, std::uint64_t seed) {
  Dataset ds;
  ds.classes = 2;
  ds.x = Tensor({n, 2});
  ds.y.resize(n);
  const std::uint64_t key = rng::derive(seed, 0x3005, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const int cls = static_cast<int>(i % 2);
    const double t = 3.14159265358979323846 * rng::uniform(rng::derive(key, i), 0, 0.0, 1.0);
    double px, py;
    if (cls == 0) {
      px = std::cos(t);
      py = std::sin(t);
    } else {
      px = 1.0 - std::cos(t);
      py = 0.5 - std::sin(t);
    }
    px += noise * rng::gaussian(rng::derive(key, i), 1);
    py += noise * rng::gaussian(rng::derive(key, i), 2);
    ds.x.data[i * 2] = px;
    ds.x.data[i * 2 + 1] = py;
    ds.y[i] = cls;
  }
  minmax_normalize(ds.x, 2);
  return ds;
}

namespace {

// Seven-segment glyphs on an 8x8 canvas; the usual digit->segment map.
// Segments: A top, B top-right, C bottom-right, D bottom, E bottom-left,
// F top-left, G middle.
const std::uint8_t kSegments[10] = {
    0b0111111,  // 0: ABCDEF
    0b0000110,  // 1: BC
    0b1011011,  // 2: ABDEG
    0b1001111,  // 3: ABCDG
    0b1100110,  // 4: BCFG
    0b1101101,  // 5: ACDFG
    0b1111101,  // 6: ACDEFG
    0b0000111,  // 7: ABC
    0b1111111,  // 8
    0b1101111,  // 9: ABCDFG
};

void render_digit(int digit, double canvas[64]) {
  std::fill(canvas, canvas + 64, 0.0);
  const std::uint8_t seg = kSegments[digit];
  auto set = [&](int r, int c) {
    if (r >= 0 && r < 8 && c >= 0 && c < 8) canvas[r * 8 + c] = 1.0;
  };
  if (seg & 0b0000001)  // A
    for (int c = 1; c <= 5; ++c) set(0, c);
  if (seg & 0b0000010)  // B
    for (int r = 0; r <= 3; ++r) set(r, 5);
  if (seg & 0b0000100)  // C
    for (int r = 3; r <= 6; ++r) set(r, 5);
  if (seg & 0b0001000)  // D
    for (int c = 1; c <= 5; ++c) set(6, c);
  if (seg & 0b0010000)  // E
    for (int r = 3; r <= 6; ++r) set(r, 1);
  if (seg & 0b0100000)  // F
    for (int r = 0; r <= 3; ++r) set(r, 1);
  if (seg & 0b1000000)  // G
    for (int c = 1; c <= 5; ++c) set(3, c);
}

}  // namespace

Dataset make_mini_digits(std::size_t n, std::uint64_t seed) {
  Dataset ds;
  ds.classes = 10;
  ds.x = Tensor({n, 1, 8, 8});
  ds.y.resize(n);
  double glyph[64];
  const std::uint64_t key = rng::derive(seed, 0xD161, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const int digit = static_cast<int>(i % 10);
    ds.y[i] = digit;
    render_digit(digit, glyph);
    const std::uint64_t ikey = rng::derive(key, i);
    // mostly small shifts with an occasional 2-pixel jump
    static const int kShift[10] = {-2, -1, -1, 0, 0, 0, 0, 1, 1, 2};
    const int dr = kShift[rng::below(ikey, 0, 10)];
    const int dc = kShift[rng::below(ikey, 1, 10)];
    const double gain = rng::uniform(ikey, 2, 0.6, 1.0);
    double* out = ds.x.data.data() + i * 64;
    for (int r = 0; r < 8; ++r) {
      for (int c = 0; c < 8; ++c) {
        const int sr = r - dr, sc = c - dc;
        double v = 0.0;
        if (sr >= 0 && sr < 8 && sc >= 0 && sc < 8) v = glyph[sr * 8 + sc];
        v = gain * v + 0.12 * rng::gaussian(ikey, 16 + r * 8 + c);
        out[r * 8 + c] = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return ds;
}

namespace {

// RFC-4180 subset: comma separator, optional double-quote escaping,
// header row mandatory.
std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      if (!cur.empty())
        throw ParseError("csv: stray quote at line " + std::to_string(line_no));
      in_quotes = true;
    } else if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (in_quotes) throw ParseError("csv: unterminated quote at line " + std::to_string(line_no));
  fields.push_back(cur);
  return fields;
}

}  // namespace

Dataset load_csv_dataset(const std::string& path, int label_col) {
  std::ifstream f(path);
  if (!f) throw ParseError("csv: cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw ParseError("csv: missing header row in " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::size_t cols = split_csv_line(line, 1).size();
  if (cols < 2) throw ParseError("csv: need at least one feature and a label column");
  const std::size_t lcol = label_col < 0 ? cols - 1 : static_cast<std::size_t>(label_col);
  if (lcol >= cols) throw ParseError("csv: label column out of range");

  std::vector<double> xs;
  std::vector<int> ys;
  std::size_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line, line_no);
    if (fields.size() != cols)
      throw ParseError("csv: line " + std::to_string(line_no) + " has " +
                       std::to_string(fields.size()) + " fields, expected " +
                       std::to_string(cols));
    for (std::size_t c = 0; c < cols; ++c) {
      try {
        if (c == lcol) {
          ys.push_back(std::stoi(fields[c]));
        } else {
          xs.push_back(std::stod(fields[c]));
        }
      } catch (const std::exception&) {
        throw ParseError("csv: bad number '" + fields[c] + "' at line " +
                         std::to_string(line_no) + ", column " + std::to_string(c + 1));
      }
    }
  }
  if (ys.empty()) throw ParseError("csv: no data rows in " + path);

  Dataset ds;
  const std::size_t features = cols - 1;
  ds.x = Tensor({ys.size(), features}, std::move(xs));
  ds.y = std::move(ys);
  int max_label = 0;
  for (int v : ds.y) {
    if (v < 0) throw ParseError("csv: negative label in " + path);
    max_label = std::max(max_label, v);
  }
  ds.classes = static_cast<std::size_t>(max_label) + 1;
  // Already-normalized files echo back exactly; out-of-range features get
  // min-max rescaled into [0,1].
  minmax_normalize(ds.x, features, /*only_if_out_of_range=*/true);
  return ds;
}

namespace {

std::uint32_t read_be32(std::ifstream& f, const std::string& path, std::size_t offset) {
  unsigned char b[4];
  if (!f.read(reinterpret_cast<char*>(b), 4))
    throw ParseError("idx: truncated header in " + path + " at offset " +
                     std::to_string(offset));
  return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
         (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

}  // namespace

Dataset load_idx_dataset(const std::string& images_path, const std::string& labels_path) {
  std::ifstream fi(images_path, std::ios::binary);
  if (!fi) throw ParseError("idx: cannot open " + images_path);
  if (read_be32(fi, images_path, 0) != 0x00000803u)
    throw ParseError("idx: bad image magic in " + images_path + " (want 0x00000803)");
  const std::uint32_t n = read_be32(fi, images_path, 4);
  const std::uint32_t h = read_be32(fi, images_path, 8);
  const std::uint32_t w = read_be32(fi, images_path, 12);

  std::ifstream fl(labels_path, std::ios::binary);
  if (!fl) throw ParseError("idx: cannot open " + labels_path);
  if (read_be32(fl, labels_path, 0) != 0x00000801u)
    throw ParseError("idx: bad label magic in " + labels_path + " (want 0x00000801)");
  const std::uint32_t nl = read_be32(fl, labels_path, 4);
  if (n != nl)
    throw ParseError("idx: image count " + std::to_string(n) + " != label count " +
                     std::to_string(nl));

  Dataset ds;
  ds.x = Tensor({n, 1, h, w});
  ds.y.resize(n);
  std::vector<unsigned char> buf(static_cast<std::size_t>(h) * w);
  for (std::uint32_t i = 0; i < n; ++i) {
    if (!fi.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
      throw ParseError("idx: truncated image data at example " + std::to_string(i));
    for (std::size_t j = 0; j < buf.size(); ++j)
      ds.x.data[static_cast<std::size_t>(i) * buf.size() + j] = buf[j] / 255.0;
    char lb;
    if (!fl.read(&lb, 1))
      throw ParseError("idx: truncated label data at example " + std::to_string(i));
    ds.y[i] = static_cast<unsigned char>(lb);
  }
  int max_label = 0;
  for (int v : ds.y) max_label = std::max(max_label, v);
  ds.classes = static_cast<std::size_t>(max_label) + 1;
  return ds;
}

DataSplits load_dataset(const DatasetSpec& spec) {
  spec.validate();
  Dataset full;
  switch (spec.source) {
    case DataSource::Blobs:
      full = make_blobs(spec.classes, spec.dim, spec.separation, spec.n, spec.seed);
      break;
    case DataSource::Moons:
      full = make_moons(spec.n, spec.noise, spec.seed);
      break;
    case DataSource::MiniDigits:
      full = make_mini_digits(spec.n, spec.seed);
      break;
    case DataSource::Csv:
      full = load_csv_dataset(spec.csv_path, spec.label_col);
      break;
    case DataSource::Idx:
      full = load_idx_dataset(spec.idx_images, spec.idx_labels);
      break;
  }
  const std::size_t n = full.size();
  const auto idx = shuffled_indices(n, rng::derive(spec.seed, 0x59117));
  const std::size_t ntest = static_cast<std::size_t>(spec.test_fraction * static_cast<double>(n));
  std::vector<std::size_t> test_idx(idx.begin(), idx.begin() + ntest);
  std::vector<std::size_t> train_idx(idx.begin() + ntest, idx.end());
  DataSplits out;
  out.test = full.subset(test_idx);
  out.train = full.subset(train_idx);
  return out;
}

}  // namespace smooth
