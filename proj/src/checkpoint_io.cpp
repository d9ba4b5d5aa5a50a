#include "byte_io.hpp"
#include "fewshot/predictor.hpp"

namespace fewshot {

namespace {
constexpr std::string_view kPhimMagic = "PHIM";
constexpr std::uint32_t kPhimVersion = 1;
}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const PhiModel& phi) {
  detail::ByteWriter w;
  w.bytes(kPhimMagic);
  w.u32(kPhimVersion);
  w.u8(static_cast<std::uint8_t>(phi.variant()));
  w.u32(static_cast<std::uint32_t>(phi.dim()));
  for (double v : phi.params().values()) w.f64(v);
  return std::move(w).take();
}

PhiModel parse_checkpoint(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "checkpoint");
  if (bytes.empty()) r.fail("empty file", 0);
  if (r.bytes(4, "magic") != kPhimMagic) r.fail("malformed header: bad magic, expected PHIM", 0);
  const std::uint32_t version = r.u32("version");
  if (version != kPhimVersion) {
    r.fail("malformed header: unsupported version " + std::to_string(version), 4);
  }
  const std::uint8_t tag = r.u8("variant tag");
  if (tag != static_cast<std::uint8_t>(PhiVariant::Linear) &&
      tag != static_cast<std::uint8_t>(PhiVariant::TwoLayer)) {
    r.fail("malformed header: unknown variant tag " + std::to_string(tag), 8);
  }
  const std::uint32_t dim = r.u32("dim");
  if (dim == 0) r.fail("malformed header: dim = 0", 9);
  const auto variant = static_cast<PhiVariant>(tag);
  const std::size_t expected = PhiParams::count(variant, dim) * 8;
  if (r.remaining() != expected) {
    r.fail("parameter payload is " + std::to_string(r.remaining()) + " bytes, expected " +
               std::to_string(expected) + " for dim " + std::to_string(dim),
           r.offset());
  }
  PhiParams p(variant, dim);
  for (double& v : p.values()) v = r.f64("parameter");
  return PhiModel(std::move(p));
}

void write_checkpoint(const std::filesystem::path& path, const PhiModel& phi) {
  detail::write_file_bytes(path, serialize_checkpoint(phi));
}

PhiModel load_checkpoint(const std::filesystem::path& path) {
  try {
    return parse_checkpoint(detail::read_file_bytes(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::uint64_t model_digest(const PhiModel& phi) {
  std::uint64_t h = 14695981039346656037ull;
  for (std::uint8_t b : serialize_checkpoint(phi)) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace fewshot
