#include "ikh/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ikh/error.hpp"

namespace ikh::net {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

class Writer {
 public:
  explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}

  template <typename T>
  void put(T value) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    out_.insert(out_.end(), p, p + sizeof(T));
  }

 private:
  std::vector<std::uint8_t>& out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}

  template <typename T>
  T get(const char* what) {
    if (in_.size() - pos_ < sizeof(T)) {
      throw Error(ErrorCode::TruncatedFile, std::string("file ends inside ") + what);
    }
    T value;
    std::memcpy(&value, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Mlp& net) {
  std::vector<std::uint8_t> bytes(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  Writer w(bytes);
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(net.layers().size()));
  for (const auto& l : net.layers()) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(l.in_dim()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(l.out_dim()));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(l.activation));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.put<float>(l.weight(r, c));
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) w.put<float>(l.bias(r));
  }
  return bytes;
}

Mlp decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw Error(ErrorCode::BadMagic, "not an IKHM checkpoint");
  }
  std::vector<std::uint8_t> body(bytes.begin() + 4, bytes.end());
  Reader r(body);
  const auto version = r.get<std::uint32_t>("header");
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::VersionUnsupported, "checkpoint version " + std::to_string(version));
  }
  const auto count = r.get<std::uint32_t>("header");
  std::vector<Layer<float>> layers;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto in = r.get<std::uint32_t>("layer header");
    const auto out = r.get<std::uint32_t>("layer header");
    const auto tag = r.get<std::uint8_t>("layer header");
    if (tag > 2) throw Error(ErrorCode::BadMagic, "unknown activation tag " + std::to_string(tag));
    const std::size_t need = (static_cast<std::size_t>(in) * out + out) * sizeof(float);
    if (r.remaining() < need) throw Error(ErrorCode::TruncatedFile, "file ends inside layer " + std::to_string(k));
    Layer<float> l;
    l.activation = static_cast<Activation>(tag);
    l.weight.resize(out, in);
    for (Eigen::Index i = 0; i < l.weight.rows(); ++i)
      for (Eigen::Index j = 0; j < l.weight.cols(); ++j) l.weight(i, j) = r.get<float>("weights");
    l.bias.resize(out);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = r.get<float>("biases");
    layers.push_back(std::move(l));
  }
  try {
    return Mlp(std::move(layers));
  } catch (const Error& e) {
    throw Error(ErrorCode::ShapeMismatch, std::string("corrupt checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Mlp& net, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(net);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

Mlp load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace ikh::net
