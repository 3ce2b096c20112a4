#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fwfm/errors.h"
#include "fwfm/models.h"

namespace fwfm {

namespace {

constexpr char kMagic[8] = {'F', 'W', 'F', 'M', 'S', 'N', 'A', 'P'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t x) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t x) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double x) { put_u64(out, std::bit_cast<std::uint64_t>(x)); }

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint64_t u(int width) {
    if (pos_ + width > bytes_.size()) throw ParseError("truncated model snapshot", 0);
    std::uint64_t x = 0;
    for (int i = 0; i < width; ++i)
      x |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += width;
    return x;
  }
  double f64() { return std::bit_cast<double>(u(8)); }
  std::string_view take(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw ParseError("truncated model snapshot", 0);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

// Layout: magic, u32 version, u32 kind, u64 m n K H H_ffm, f64 w0, then per
// block u64 width, u64 count, count x f64. All little-endian.
std::string serialize_snapshot(const ModelParams& params) {
  std::string out(kMagic, sizeof(kMagic));
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(params.kind));
  const auto& d = params.dims;
  for (auto x : {d.n_features, d.n_fields, d.k, d.hash_space, d.ffm_hash_space}) put_u64(out, x);
  put_f64(out, params.w0);
  for (const auto& t : params.blocks) {
    put_u64(out, t.width);
    put_u64(out, t.values.size());
    for (double x : t.values) put_f64(out, x);
  }
  return out;
}

ModelParams deserialize_snapshot(std::string_view bytes) {
  Reader in(bytes);
  if (in.take(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic)))
    throw ParseError("not an fwfm model snapshot", 0);
  if (const auto version = in.u(4); version != kVersion)
    throw ParseError("unsupported snapshot version " + std::to_string(version), 0);
  const auto kind_raw = in.u(4);
  if (kind_raw >= kAllModelKinds.size()) throw ParseError("unknown model kind in snapshot", 0);
  ModelDims dims;
  dims.n_features = in.u(8);
  dims.n_fields = in.u(8);
  dims.k = in.u(8);
  dims.hash_space = in.u(8);
  dims.ffm_hash_space = in.u(8);
  const auto kind = static_cast<ModelKind>(kind_raw);
  ModelParams params = make_params(kind, dims);
  params.w0 = in.f64();
  for (auto& t : params.blocks) {
    const auto width = in.u(8);
    const auto count = in.u(8);
    if (count != t.values.size() || (count > 0 && width != t.width))
      throw ParseError("snapshot block shape does not match its dimensions", 0);
    for (double& x : t.values) x = in.f64();
  }
  if (!in.done()) throw ParseError("trailing bytes in model snapshot", 0);
  return params;
}

void save_snapshot(const ModelParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  const auto bytes = serialize_snapshot(params);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path);
}

ModelParams load_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_snapshot(buf.str());
}

}  // namespace fwfm
