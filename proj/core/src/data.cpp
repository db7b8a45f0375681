#include "fedsaf/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "fedsaf/errors.hpp"
#include "fedsaf/rng.hpp"

namespace fedsaf {

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.num_classes = num_classes;
  out.name = name;
  out.features = Matrix(rows.size(), features.cols);
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = features.row(rows[i]);
    std::copy(src.begin(), src.end(), out.features.data.begin() + static_cast<std::ptrdiff_t>(i * features.cols));
    out.labels.push_back(labels[rows[i]]);
  }
  return out;
}

void Dataset::validate() const {
  if (features.rows != labels.size())
    throw IntegrityError(name + ": " + std::to_string(features.rows) + " feature rows vs " +
                         std::to_string(labels.size()) + " labels");
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes)
      throw IntegrityError(name + ": label " + std::to_string(y) + " outside [0, " +
                           std::to_string(num_classes) + ")");
}

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t offset,
                        const std::filesystem::path& path) {
  if (offset + 4 > buf.size())
    throw FormatError(path.string() + ": truncated header at byte offset " + std::to_string(offset));
  return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
         (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

void rescale_columns(Matrix& m) {
  for (std::size_t c = 0; c < m.cols; ++c) {
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t r = 0; r < m.rows; ++r) {
      lo = std::min(lo, m(r, c));
      hi = std::max(hi, m(r, c));
    }
    const double span = hi - lo;
    for (std::size_t r = 0; r < m.rows; ++r) m(r, c) = span > 0.0 ? (m(r, c) - lo) / span : 0.0;
  }
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 std::size_t limit) {
  constexpr std::uint32_t kImageMagic = 0x00000803;
  constexpr std::uint32_t kLabelMagic = 0x00000801;

  const auto img = read_file(images_path);
  const auto lab = read_file(labels_path);

  if (auto magic = read_be32(img, 0, images_path); magic != kImageMagic)
    throw FormatError(images_path.string() + ": bad magic at byte offset 0 (expected 0x00000803)");
  if (auto magic = read_be32(lab, 0, labels_path); magic != kLabelMagic)
    throw FormatError(labels_path.string() + ": bad magic at byte offset 0 (expected 0x00000801)");

  const std::size_t n_img = read_be32(img, 4, images_path);
  const std::size_t n_rows = read_be32(img, 8, images_path);
  const std::size_t n_cols = read_be32(img, 12, images_path);
  const std::size_t n_lab = read_be32(lab, 4, labels_path);
  if (n_img != n_lab)
    throw FormatError("image count " + std::to_string(n_img) + " != label count " +
                      std::to_string(n_lab));
  const std::size_t pixels = n_rows * n_cols;
  if (img.size() < 16 + n_img * pixels)
    throw FormatError(images_path.string() + ": truncated pixel data at byte offset " +
                      std::to_string(img.size()));
  if (lab.size() < 8 + n_lab)
    throw FormatError(labels_path.string() + ": truncated label data at byte offset " +
                      std::to_string(lab.size()));

  const std::size_t n = limit > 0 ? std::min(limit, n_img) : n_img;
  Dataset ds;
  ds.name = images_path.stem().string();
  ds.features = Matrix(n, pixels);
  ds.labels.resize(n);
  int max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < pixels; ++p)
      ds.features.data[i * pixels + p] = static_cast<double>(img[16 + i * pixels + p]) / 255.0;
    ds.labels[i] = lab[8 + i];
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.num_classes = std::max<std::size_t>(10, static_cast<std::size_t>(max_label) + 1);
  return ds;
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": missing header row");
  const std::size_t cols = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  if (cols < 2) throw FormatError(path.string() + ": need at least one feature and a label column");

  std::vector<double> values;
  std::vector<int> labels;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::istringstream row(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(row, cell, ',')) {
      try {
        if (c + 1 < cols)
          values.push_back(std::stod(cell));
        else if (c + 1 == cols)
          labels.push_back(std::stoi(cell));
      } catch (const std::exception&) {
        throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad value '" + cell + "'");
      }
      ++c;
    }
    if (c != cols)
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(cols) + " fields, got " + std::to_string(c));
    if (labels.back() < 0)
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": negative label");
  }
  Dataset ds;
  ds.name = path.stem().string();
  ds.features.rows = labels.size();
  ds.features.cols = cols - 1;
  ds.features.data = std::move(values);
  ds.labels = std::move(labels);
  ds.num_classes = 2;
  for (int y : ds.labels) ds.num_classes = std::max(ds.num_classes, static_cast<std::size_t>(y) + 1);
  rescale_columns(ds.features);
  return ds;
}

Dataset generate_synthetic(std::size_t num_classes, std::size_t samples_per_class, std::size_t dim,
                           double separation, std::uint64_t seed) {
  if (num_classes < 2 || samples_per_class == 0 || dim == 0)
    throw ConfigError("generate_synthetic: sizes must be positive (num_classes >= 2)");
  if (separation < 0.0) throw ConfigError("generate_synthetic: separation must be >= 0");

  Rng rng(derive_seed(seed, {0xb10b}));
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<std::vector<double>> means(num_classes, std::vector<double>(dim));
  for (auto& mu : means) {
    double norm = 0.0;
    while (norm == 0.0) {
      norm = 0.0;
      for (auto& v : mu) {
        v = normal(rng);
        norm += v * v;
      }
      norm = std::sqrt(norm);
    }
    for (auto& v : mu) v *= separation / norm;
  }

  Dataset ds;
  ds.name = "synthetic";
  ds.num_classes = num_classes;
  ds.features = Matrix(num_classes * samples_per_class, dim);
  ds.labels.reserve(num_classes * samples_per_class);
  std::size_t r = 0;
  for (std::size_t c = 0; c < num_classes; ++c)
    for (std::size_t s = 0; s < samples_per_class; ++s, ++r) {
      for (std::size_t d = 0; d < dim; ++d) ds.features(r, d) = means[c][d] + normal(rng);
      ds.labels.push_back(static_cast<int>(c));
    }
  rescale_columns(ds.features);
  return ds;
}

namespace {

std::vector<std::vector<std::size_t>> rows_by_class(const Dataset& data) {
  std::vector<std::vector<std::size_t>> by_class(data.num_classes);
  for (std::size_t r = 0; r < data.size(); ++r)
    by_class[static_cast<std::size_t>(data.labels[r])].push_back(r);
  return by_class;
}

void check_fraction(double test_fraction) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ConfigError("test_fraction must lie in (0, 1)");
}

// Stratified train/test split of one client's rows. Every class with at
// least two rows lands on both sides.
ClientData finish_client(const Dataset& data, std::vector<std::vector<std::size_t>> per_class,
                         double test_fraction, Rng& rng, std::size_t client) {
  ClientData cd;
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    auto& rows = per_class[c];
    if (rows.empty()) continue;
    std::shuffle(rows.begin(), rows.end(), rng);
    std::size_t n_test = static_cast<std::size_t>(std::lround(static_cast<double>(rows.size()) * test_fraction));
    if (rows.size() >= 2) n_test = std::clamp<std::size_t>(n_test, 1, rows.size() - 1);
    else n_test = 0;
    cd.test_index.insert(cd.test_index.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_test));
    cd.train_index.insert(cd.train_index.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_test), rows.end());
    cd.classes.push_back(static_cast<int>(c));
  }
  if (cd.train_index.empty() || cd.test_index.empty())
    throw PartitionError("client " + std::to_string(client) + " has too few samples for a train/test split");
  std::sort(cd.train_index.begin(), cd.train_index.end());
  std::sort(cd.test_index.begin(), cd.test_index.end());
  cd.train = data.subset(cd.train_index);
  cd.test = data.subset(cd.test_index);
  cd.train.name = data.name + "/client" + std::to_string(client) + "/train";
  cd.test.name = data.name + "/client" + std::to_string(client) + "/test";
  return cd;
}

}  // namespace

Partition partition_noniid(const Dataset& data, std::size_t m, std::size_t classes_per_client,
                           double unbalance, double test_fraction, std::uint64_t seed) {
  data.validate();
  check_fraction(test_fraction);
  const std::size_t C = data.num_classes;
  const std::size_t S = classes_per_client;
  if (m == 0) throw ConfigError("partition: client count must be positive");
  if (S == 0 || S > C)
    throw ConfigError("partition: classes per client S=" + std::to_string(S) + " must lie in [1, " +
                      std::to_string(C) + "]");
  if (m * S < C)
    throw PartitionError("partition: " + std::to_string(m) + " clients x " + std::to_string(S) +
                         " classes cannot cover " + std::to_string(C) + " classes");
  if (unbalance < 0.0) throw ConfigError("partition: unbalance must be >= 0");

  Rng rng(derive_seed(seed, {0x9a27}));
  std::vector<std::size_t> class_order(C);
  std::iota(class_order.begin(), class_order.end(), 0);
  std::shuffle(class_order.begin(), class_order.end(), rng);

  std::vector<std::vector<std::size_t>> owned(m);
  std::vector<std::vector<std::size_t>> owners(C);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t s = 0; s < S; ++s) {
      const std::size_t c = class_order[(i * S + s) % C];
      owned[i].push_back(c);
      owners[c].push_back(i);
    }

  std::vector<double> share(m);
  for (std::size_t i = 0; i < m; ++i) share[i] = std::pow(static_cast<double>(i + 1), unbalance);
  const double share_sum = std::accumulate(share.begin(), share.end(), 0.0);
  for (auto& s : share) s /= share_sum;

  auto by_class = rows_by_class(data);
  for (auto& rows : by_class) std::shuffle(rows.begin(), rows.end(), rng);

  // Largest total t such that every client can draw t*share[i]/S rows from each
  // of its classes without exhausting any class.
  double total = INFINITY;
  for (std::size_t c = 0; c < C; ++c) {
    if (owners[c].empty()) continue;
    double demand = 0.0;
    for (auto i : owners[c]) demand += share[i];
    total = std::min(total, static_cast<double>(by_class[c].size()) * static_cast<double>(S) / demand);
  }

  std::vector<std::size_t> cursor(C, 0);
  Partition part;
  part.classes_per_client = S;
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<std::vector<std::size_t>> per_class(C);
    const auto quota = static_cast<std::size_t>(std::floor(total * share[i] / static_cast<double>(S) + 1e-9));
    for (auto c : owned[i]) {
      if (quota < 2 || cursor[c] + quota > by_class[c].size())
        throw PartitionError("partition: client " + std::to_string(i) + " gets too few samples of class " +
                             std::to_string(c));
      per_class[c].assign(by_class[c].begin() + static_cast<std::ptrdiff_t>(cursor[c]),
                          by_class[c].begin() + static_cast<std::ptrdiff_t>(cursor[c] + quota));
      cursor[c] += quota;
    }
    part.clients.push_back(finish_client(data, std::move(per_class), test_fraction, rng, i));
  }
  return part;
}

Partition iid_partition(const Dataset& data, std::size_t m, double test_fraction,
                        std::uint64_t seed) {
  data.validate();
  check_fraction(test_fraction);
  if (m == 0) throw ConfigError("partition: client count must be positive");
  if (m > data.size())
    throw PartitionError("partition: " + std::to_string(m) + " clients for " +
                         std::to_string(data.size()) + " samples");
  Rng rng(derive_seed(seed, {0x11d}));
  auto by_class = rows_by_class(data);
  std::vector<std::vector<std::vector<std::size_t>>> per_client(
      m, std::vector<std::vector<std::size_t>>(data.num_classes));
  std::size_t next = 0;  // rotates so leftovers spread across clients
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    std::shuffle(by_class[c].begin(), by_class[c].end(), rng);
    for (auto r : by_class[c]) {
      per_client[next][c].push_back(r);
      next = (next + 1) % m;
    }
  }
  Partition part;
  part.classes_per_client = data.num_classes;
  for (std::size_t i = 0; i < m; ++i)
    part.clients.push_back(finish_client(data, std::move(per_client[i]), test_fraction, rng, i));
  return part;
}

}  // namespace fedsaf
