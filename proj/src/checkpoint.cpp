#include "ddn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <cstdio>

#include "ddn/error.hpp"
#include "ddn/io.hpp"
#include "ddn/rng.hpp"

namespace ddn {
namespace {

constexpr char kMagic[8] = {'D', 'D', 'N', 'C', 'K', 'P', 'T', '\0'};

std::uint64_t hash_bytes(const std::uint8_t* p, std::size_t n) {
  return fnv1a64(std::string_view(reinterpret_cast<const char*>(p), n));
}

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

class Writer {
public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) { bytes(&v, sizeof v); }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void f64(double v) { bytes(&v, sizeof v); }
  void extent(std::size_t v) {
    if (v > UINT32_MAX) throw ConfigError("checkpoint: extent too large for u32");
    u32(static_cast<std::uint32_t>(v));
  }
  std::vector<std::uint8_t>& buffer() { return out_; }

private:
  std::vector<std::uint8_t> out_;
};

class Reader {
public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  void bytes(void* p, std::size_t n) {
    if (n > in_.size() - pos_)
      throw FormatError(FormatError::Kind::truncated,
                        "checkpoint truncated at byte " + std::to_string(pos_) + " (needed " +
                            std::to_string(n) + " more, file has " + std::to_string(in_.size()) +
                            ")");
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, sizeof v);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, sizeof v);
    return v;
  }
  double f64() {
    double v;
    bytes(&v, sizeof v);
    return v;
  }
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }

private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void write_tensor(Writer& w, const std::string& name, const Tensor<float>& t) {
  w.extent(name.size());
  w.bytes(name.data(), name.size());
  w.extent(t.rank());
  for (std::size_t e : t.shape()) w.extent(e);
  w.bytes(t.ptr(), t.numel() * sizeof(float));
}

struct RawTensor {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

RawTensor read_tensor(Reader& r) {
  RawTensor t;
  const std::uint32_t name_len = r.u32();
  if (name_len > r.remaining())
    throw FormatError(FormatError::Kind::truncated, "checkpoint truncated inside a tensor name");
  t.name.resize(name_len);
  r.bytes(t.name.data(), name_len);
  const std::uint32_t rank = r.u32();
  if (rank > 8)
    throw FormatError(FormatError::Kind::corrupt,
                      "checkpoint tensor '" + t.name + "' declares rank " + std::to_string(rank));
  std::size_t numel = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    t.shape.push_back(r.u32());
    numel *= t.shape.back();
  }
  if (numel > r.remaining() / sizeof(float))
    throw FormatError(FormatError::Kind::truncated,
                      "checkpoint truncated inside tensor '" + t.name + "'");
  t.values.resize(numel);
  r.bytes(t.values.data(), numel * sizeof(float));
  return t;
}

void write_config(Writer& w, const ModelConfig& c, double sigma) {
  w.u32(static_cast<std::uint32_t>(c.variant));
  w.extent(c.input_channels);
  w.extent(c.base_channels);
  w.extent(c.pairs);
  w.extent(c.growth_rate);
  w.extent(c.block_layers);
  w.extent(c.dncnn_depth);
  w.u32(c.skip_to_transitions ? 1U : 0U);
  w.f64(sigma);
}

ModelConfig read_config(Reader& r, double& sigma) {
  ModelConfig c;
  const std::uint32_t variant = r.u32();
  if (variant > static_cast<std::uint32_t>(Variant::dncnn_ref))
    throw FormatError(FormatError::Kind::corrupt,
                      "checkpoint declares unknown variant " + std::to_string(variant));
  c.variant = static_cast<Variant>(variant);
  c.input_channels = r.u32();
  c.base_channels = r.u32();
  c.pairs = r.u32();
  c.growth_rate = r.u32();
  c.block_layers = r.u32();
  c.dncnn_depth = r.u32();
  const std::uint32_t skip = r.u32();
  if (skip > 1) throw FormatError(FormatError::Kind::corrupt, "checkpoint skip flag is not 0/1");
  c.skip_to_transitions = skip == 1;
  sigma = r.f64();
  return c;
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Network<float>& net) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);
  write_config(w, net.config(), net.trained_sigma());
  const auto params = net.parameters();
  const auto buffers = net.buffers();
  w.extent(params.size() + buffers.size());
  for (const Parameter<float>* p : params) write_tensor(w, p->name(), p->value());
  for (const Buffer<float>* b : buffers) write_tensor(w, b->name, b->value);
  const std::uint64_t checksum = hash_bytes(w.buffer().data(), w.buffer().size());
  w.u64(checksum);
  return std::move(w.buffer());
}

Network<float> deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  using Kind = FormatError::Kind;
  Reader r(bytes);
  char magic[sizeof kMagic];
  if (bytes.size() < sizeof magic || std::memcmp(bytes.data(), kMagic, sizeof magic) != 0)
    throw FormatError(Kind::bad_magic, "not a checkpoint file (bad magic bytes)");
  r.bytes(magic, sizeof magic);

  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw FormatError(Kind::version_mismatch, "checkpoint version " + std::to_string(version) +
                                                  " is not supported (expected " +
                                                  std::to_string(kCheckpointVersion) + ")");

  double sigma = 0.0;
  const ModelConfig config = read_config(r, sigma);
  const std::uint32_t count = r.u32();
  std::vector<RawTensor> tensors;
  for (std::uint32_t i = 0; i < count; ++i) tensors.push_back(read_tensor(r));

  const std::size_t payload_end = r.position();
  const std::uint64_t stored = r.u64();
  if (r.remaining() != 0)
    throw FormatError(Kind::corrupt, "checkpoint has " + std::to_string(r.remaining()) +
                                         " trailing bytes");
  if (stored != hash_bytes(bytes.data(), payload_end))
    throw FormatError(Kind::corrupt, "checkpoint checksum mismatch");

  try {
    config.validate();
  } catch (const ConfigError& e) {
    throw FormatError(Kind::corrupt, std::string("checkpoint config is invalid: ") + e.what());
  }
  Network<float> net = Network<float>::build(config);
  net.set_trained_sigma(sigma);

  std::vector<std::pair<std::string, Tensor<float>*>> slots;
  for (Parameter<float>* p : net.parameters()) slots.emplace_back(p->name(), &p->value());
  for (Buffer<float>* b : net.buffers()) slots.emplace_back(b->name, &b->value);
  if (slots.size() != tensors.size())
    throw FormatError(Kind::shape_mismatch,
                      "checkpoint holds " + std::to_string(tensors.size()) +
                          " tensors but its config declares " + std::to_string(slots.size()));
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const RawTensor& t = tensors[i];
    Tensor<float>& dst = *slots[i].second;
    if (t.name != slots[i].first)
      throw FormatError(Kind::shape_mismatch, "checkpoint tensor " + std::to_string(i) + " is '" +
                                                  t.name + "', expected '" + slots[i].first + "'");
    if (t.shape != dst.shape())
      throw FormatError(Kind::shape_mismatch, "checkpoint tensor '" + t.name + "' has shape " +
                                                  to_string(t.shape) + ", config implies " +
                                                  to_string(dst.shape()));
    std::memcpy(dst.ptr(), t.values.data(), t.values.size() * sizeof(float));
  }
  return net;
}

void save_checkpoint(const Network<float>& net, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(net));
}

Network<float> load_checkpoint(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_file_bytes(path);
  try {
    return deserialize_checkpoint(bytes);
  } catch (const FormatError& e) {
    throw FormatError(e.kind(), path.string() + ": " + e.what());
  }
}

std::string checkpoint_hash(const Network<float>& net) {
  const std::vector<std::uint8_t> bytes = serialize_checkpoint(net);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(hash_bytes(bytes.data(), bytes.size())));
  return buf;
}

}  // namespace ddn
