#include "atlt/nets/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "atlt/core/digest.hpp"
#include "atlt/core/errors.hpp"

namespace atlt::nets {
namespace {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_bytes(std::vector<unsigned char>& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

class Reader {
 public:
  explicit Reader(const std::vector<unsigned char>& b) : bytes_(b) {}

  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw DataError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string str() {
    const auto n = u32();
    need(n);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_), bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<unsigned char>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<unsigned char> encode_checkpoint(const Model<float>& model, const nlohmann::json& meta) {
  std::vector<unsigned char> out{'A', 'T', 'L', 'T'};
  put_u32(out, kCheckpointVersion);
  const nlohmann::json header = {{"model", model.spec()}, {"meta", meta}};
  put_bytes(out, header.dump());
  put_u32(out, static_cast<std::uint32_t>(model.parameters().size()));
  for (const auto& p : model.parameters()) {
    put_bytes(out, p.name);
    put_u32(out, static_cast<std::uint32_t>(p.value.rank()));
    for (auto d : p.value.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    put_u32(out, static_cast<std::uint32_t>(p.value.numel()));
    for (float v : p.value.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "ATLT", 4) != 0) throw DataError("not a checkpoint (bad magic)");
  Reader r(bytes);
  r.need(4);
  r.u32();  // magic, already checked
  const auto version = r.u32();
  if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.str());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint header: ") + e.what());
  }
  ModelSpec spec;
  try {
    spec = header.at("model").get<ModelSpec>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint model spec: ") + e.what());
  }
  const auto count = r.u32();
  std::vector<Parameter<float>> params;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str();
    const auto rank = r.u32();
    Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(r.u32());
    const auto n = r.u32();
    if (n != shape_numel(shape)) throw DataError("parameter " + name + " value count does not match shape");
    r.need(static_cast<std::size_t>(n) * 4);
    std::vector<float> values(n);
    for (auto& v : values) v = r.f32();
    params.emplace_back(std::move(name), Tensor<float>(std::move(shape), std::move(values)));
  }
  if (!r.done()) throw DataError("trailing bytes after checkpoint payload");
  try {
    return Checkpoint{Model<float>(std::move(spec), std::move(params)), header.value("meta", nlohmann::json::object())};
  } catch (const ShapeError& e) {
    throw DataError(std::string("checkpoint parameters: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Model<float>& model, const nlohmann::json& meta) {
  const auto bytes = encode_checkpoint(model, meta);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

std::string checkpoint_digest(const Model<float>& model, const nlohmann::json& meta) {
  const auto bytes = encode_checkpoint(model, meta);
  return hex64(fnv1a64(std::span<const unsigned char>(bytes)));
}

}  // namespace atlt::nets
