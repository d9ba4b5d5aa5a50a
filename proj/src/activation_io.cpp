#include <charconv>
#include <fstream>
#include <sstream>
#include <string>

#include "byte_io.hpp"
#include "fewshot/data.hpp"

namespace fewshot {

namespace detail {

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace detail

namespace {

constexpr std::string_view kActvMagic = "ACTV";
constexpr std::uint32_t kActvVersion = 1;
constexpr std::size_t kActvHeaderBytes = 16;

ActivationStore parse_csv_store(std::istream& in, const std::string& name) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  std::vector<CategoryId> labels;
  std::vector<double> values;
  auto fail = [&](const std::string& msg) {
    throw ValidationError(name + ":" + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() < 2) fail("expected category_id followed by at least one value");
    CategoryId y = 0;
    {
      auto f = fields[0];
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), y);
      if (ec != std::errc() || p != f.data() + f.size()) {
        fail("bad category id '" + std::string(f) + "'");
      }
    }
    const std::size_t row_dim = fields.size() - 1;
    if (dim == 0) {
      dim = row_dim;
    } else if (row_dim != dim) {
      fail("dimension mismatch: row has " + std::to_string(row_dim) + " values, expected " +
           std::to_string(dim));
    }
    for (std::size_t j = 1; j < fields.size(); ++j) {
      auto f = fields[j];
      double v = 0.0;
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || p != f.data() + f.size()) {
        fail("bad value '" + std::string(f) + "' in column " + std::to_string(j + 1));
      }
      values.push_back(v);
    }
    labels.push_back(y);
  }
  if (labels.empty()) throw ValidationError(name + ":1: empty file");
  return ActivationStore(dim, std::move(labels), std::move(values));
}

}  // namespace

ActivationStore parse_binary_store(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "activation file");
  if (bytes.empty()) r.fail("empty file", 0);
  if (r.bytes(4, "magic") != kActvMagic) r.fail("malformed header: bad magic, expected ACTV", 0);
  const std::uint32_t version = r.u32("version");
  if (version != kActvVersion) {
    r.fail("malformed header: unsupported version " + std::to_string(version), 4);
  }
  const std::uint32_t n_samples = r.u32("n_samples");
  const std::uint32_t dim = r.u32("dim");
  if (n_samples == 0) r.fail("empty file: n_samples = 0", 8);
  if (dim == 0) r.fail("malformed header: dim = 0", 12);

  const std::size_t payload = bytes.size() - kActvHeaderBytes;
  const std::size_t record = 4 + 4 * std::size_t{dim};
  if (payload != std::size_t{n_samples} * record) {
    if (payload % n_samples == 0 && payload / n_samples >= 4 && (payload / n_samples) % 4 == 0) {
      const std::size_t implied = payload / n_samples / 4 - 1;
      r.fail("dimension mismatch: header declares dim=" + std::to_string(dim) +
                 " but payload implies dim=" + std::to_string(implied),
             12);
    }
    r.fail("payload length " + std::to_string(payload) + " does not match " +
               std::to_string(n_samples) + " records of dim " + std::to_string(dim),
           kActvHeaderBytes);
  }

  std::vector<CategoryId> labels(n_samples);
  std::vector<double> values(std::size_t{n_samples} * dim);
  for (std::size_t i = 0; i < n_samples; ++i) {
    labels[i] = r.u32("category_id");
    for (std::size_t j = 0; j < dim; ++j) values[i * dim + j] = r.f32("value");
  }
  return ActivationStore(dim, std::move(labels), std::move(values));
}

std::vector<std::uint8_t> serialize_binary_store(const ActivationStore& store) {
  detail::ByteWriter w;
  w.bytes(kActvMagic);
  w.u32(kActvVersion);
  w.u32(static_cast<std::uint32_t>(store.size()));
  w.u32(static_cast<std::uint32_t>(store.dim()));
  for (std::size_t i = 0; i < store.size(); ++i) {
    w.u32(store.category(i));
    for (double v : store.row(i)) w.f32(static_cast<float>(v));
  }
  return std::move(w).take();
}

ActivationStore load_store(const std::filesystem::path& path, StoreFormat format) {
  if (format == StoreFormat::Binary) {
    try {
      return parse_binary_store(detail::read_file_bytes(path));
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ": " + e.what());
    }
  }
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  return parse_csv_store(in, path.string());
}

void write_store(const std::filesystem::path& path, const ActivationStore& store) {
  detail::write_file_bytes(path, serialize_binary_store(store));
}

}  // namespace fewshot
