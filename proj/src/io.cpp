#include "rpn/io.hpp"

#include <bit>
#include <chrono>
#include <fstream>

#include "rpn/rng.hpp"

namespace rpn {
namespace {

constexpr char kTensorMagic[8] = {'R', 'P', 'N', 'D', 'U', 'M', 'P', '1'};
constexpr char kCheckpointMagic[8] = {'R', 'P', 'N', 'C', 'K', 'P', 'T', '1'};
constexpr std::size_t kHashOffset = 8 + 4 + 8;
constexpr std::size_t kPayloadOffset = kHashOffset + 8;

std::uint64_t now_unix() {
  return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::seconds>(
                                        std::chrono::system_clock::now().time_since_epoch())
                                        .count());
}

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(const char* data, std::size_t n) { bytes_.append(data, n); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.append(s);
  }
  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
};

class Reader {
 public:
  Reader(std::string bytes, std::filesystem::path path)
      : bytes_(std::move(bytes)), path_(std::move(path)) {}

  std::uint32_t u32() {
    need(4, "integer");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8, "integer");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t len = u32();
    need(len, "string");
    std::string s = bytes_.substr(pos_, len);
    pos_ += len;
    return s;
  }
  void expect_magic(const char (&magic)[8], const char* kind) {
    need(8, "magic");
    if (bytes_.compare(0, 8, magic, 8) != 0)
      throw ParseError(path_.string() + ": not a " + std::string(kind) + " file (byte 0)");
    pos_ += 8;
  }
  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::string_view payload_view() const {
    return std::string_view(bytes_).substr(kPayloadOffset);
  }
  [[noreturn]] void fail(const std::string& what) const { fail_at(pos_, what); }
  [[noreturn]] void fail_at(std::size_t offset, const std::string& what) const {
    throw ParseError(path_.string() + ": " + what + " (byte " + std::to_string(offset) + ")");
  }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n)
      throw ParseError(path_.string() + ": truncated " + what + " (byte " +
                       std::to_string(bytes_.size()) + " of " +
                       std::to_string(pos_ + n) + " needed)");
  }

  std::string bytes_;
  std::filesystem::path path_;
  std::size_t pos_ = 0;
};

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

void write_file(const std::filesystem::path& path, const char (&magic)[8],
                std::uint64_t created_unix, const std::string& payload) {
  Writer header;
  header.raw(magic, 8);
  header.u32(kDumpFormatVersion);
  header.u64(created_unix);
  header.u64(detail::fnv1a64(payload));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(header.bytes().data(), static_cast<std::streamsize>(header.bytes().size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

// Validates magic, version, and payload hash; leaves the reader at the
// payload start and returns the header timestamp.
std::uint64_t open_checked(Reader& reader, const char (&magic)[8], const char* kind) {
  reader.expect_magic(magic, kind);
  const std::uint32_t version = reader.u32();
  if (version != kDumpFormatVersion)
    reader.fail_at(8, "unsupported " + std::string(kind) + " version " + std::to_string(version));
  const std::uint64_t created = reader.u64();
  const std::uint64_t stored_hash = reader.u64();
  const std::uint64_t actual = detail::fnv1a64(reader.payload_view());
  if (stored_hash != actual) reader.fail_at(kHashOffset, "payload hash mismatch");
  return created;
}

void write_tensor_payload(Writer& w, const Tensor& tensor) {
  w.u32(static_cast<std::uint32_t>(tensor.rank()));
  for (Index d = 0; d < tensor.rank(); ++d)
    w.u64(static_cast<std::uint64_t>(tensor.extent(d)));
  for (Index i = 0; i < tensor.size(); ++i) w.f64(tensor(i));
}

Tensor read_tensor_payload(Reader& r) {
  const std::uint32_t rank = r.u32();
  if (rank < 1 || rank > 3) r.fail("tensor rank " + std::to_string(rank) + " outside 1..3");
  std::vector<Index> shape;
  std::size_t total = 1;
  for (std::uint32_t d = 0; d < rank; ++d) {
    const std::uint64_t extent = r.u64();
    if (extent == 0 || extent > (std::uint64_t{1} << 32))
      r.fail("tensor extent " + std::to_string(extent) + " out of range");
    shape.push_back(static_cast<Index>(extent));
    total *= extent;
  }
  if (r.remaining() < total * 8) r.fail("tensor data shorter than its shape");
  Tensor tensor = Tensor::zeros(std::move(shape));
  for (Index i = 0; i < tensor.size(); ++i) tensor(i) = r.f64();
  return tensor;
}

}  // namespace

void write_tensor_dump(const std::filesystem::path& path, const Tensor& tensor,
                       std::uint64_t created_unix) {
  if (tensor.rank() < 1) throw DimensionError("cannot dump an empty tensor");
  Writer payload;
  write_tensor_payload(payload, tensor);
  write_file(path, kTensorMagic, created_unix, payload.bytes());
}

void write_tensor_dump(const std::filesystem::path& path, const Tensor& tensor) {
  write_tensor_dump(path, tensor, now_unix());
}

TensorDump read_tensor_dump(const std::filesystem::path& path) {
  Reader reader(slurp(path), path);
  TensorDump dump;
  dump.created_unix = open_checked(reader, kTensorMagic, "tensor dump");
  dump.tensor = read_tensor_payload(reader);
  if (reader.remaining() != 0) reader.fail("trailing bytes after tensor data");
  return dump;
}

std::uint64_t read_payload_hash(const std::filesystem::path& path) {
  const std::string bytes = slurp(path);
  if (bytes.size() < kPayloadOffset)
    throw ParseError(path.string() + ": truncated header (byte " +
                     std::to_string(bytes.size()) + " of " +
                     std::to_string(kPayloadOffset) + " needed)");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[kHashOffset + i]))
         << (8 * i);
  return v;
}

void write_checkpoint(const std::filesystem::path& path, const TextCnnModel& model,
                      const Vocabulary& vocab, const KeyValueConfig& config,
                      std::uint64_t created_unix) {
  if (model.config().vocab_size != vocab.size())
    throw ConfigError("checkpoint: model vocab " + std::to_string(model.config().vocab_size) +
                      " != vocabulary size " + std::to_string(vocab.size()));

  KeyValueConfig stored = config;
  stored.set("model.vocab_size", std::to_string(model.config().vocab_size));
  stored.set("model.embed_dim", std::to_string(model.config().embed_dim));
  std::string widths;
  for (std::size_t i = 0; i < model.config().filter_widths.size(); ++i) {
    if (i > 0) widths += ',';
    widths += std::to_string(model.config().filter_widths[i]);
  }
  stored.set("model.filter_widths", widths);
  stored.set("model.filters_per_width", std::to_string(model.config().filters_per_width));
  stored.set("model.num_classes", std::to_string(model.config().num_classes));
  stored.set("model.dropout", format_double(model.config().dropout));

  Writer payload;
  const std::vector<std::string> lines = stored.render();
  payload.u32(static_cast<std::uint32_t>(lines.size()));
  for (const std::string& line : lines) payload.str(line);

  payload.u32(static_cast<std::uint32_t>(vocab.tokens().size()));
  for (const std::string& token : vocab.tokens()) payload.str(token);

  const auto params = model.parameters();
  payload.u32(static_cast<std::uint32_t>(params.size()));
  for (const NamedParameter& p : params) {
    payload.str(p.name);
    write_tensor_payload(payload, *p.value);
  }
  write_file(path, kCheckpointMagic, created_unix, payload.bytes());
}

void write_checkpoint(const std::filesystem::path& path, const TextCnnModel& model,
                      const Vocabulary& vocab, const KeyValueConfig& config) {
  write_checkpoint(path, model, vocab, config, now_unix());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  Reader reader(slurp(path), path);
  open_checked(reader, kCheckpointMagic, "checkpoint");

  Checkpoint ckpt;
  std::vector<std::string> lines;
  const std::uint32_t line_count = reader.u32();
  lines.reserve(line_count);
  for (std::uint32_t i = 0; i < line_count; ++i) lines.push_back(reader.str());
  ckpt.config = KeyValueConfig::from_lines(lines);

  std::vector<std::string> tokens;
  const std::uint32_t token_count = reader.u32();
  tokens.reserve(token_count);
  for (std::uint32_t i = 0; i < token_count; ++i) tokens.push_back(reader.str());
  ckpt.vocab = Vocabulary::from_tokens(std::move(tokens));

  const std::uint32_t tensor_count = reader.u32();
  for (std::uint32_t i = 0; i < tensor_count; ++i) {
    std::string name = reader.str();
    Tensor tensor = read_tensor_payload(reader);
    ckpt.tensors.emplace_back(std::move(name), std::move(tensor));
  }
  if (reader.remaining() != 0) reader.fail("trailing bytes after tensors");
  return ckpt;
}

TextCnnModel restore_model(const Checkpoint& checkpoint) {
  TextCnnConfig config;
  config.vocab_size = static_cast<Index>(checkpoint.config.get_int("model.vocab_size", 0));
  config.embed_dim = static_cast<Index>(checkpoint.config.get_int("model.embed_dim", 0));
  const auto widths = checkpoint.config.get_int_list("model.filter_widths", {});
  config.filter_widths.assign(widths.begin(), widths.end());
  config.filters_per_width =
      static_cast<Index>(checkpoint.config.get_int("model.filters_per_width", 0));
  config.num_classes = static_cast<Index>(checkpoint.config.get_int("model.num_classes", 0));
  config.dropout = checkpoint.config.get_double("model.dropout", 0.0);
  config.validate();

  TextCnnModel model(config, RngStream(0));
  auto params = model.parameters();
  if (params.size() != checkpoint.tensors.size())
    throw DataError("checkpoint holds " + std::to_string(checkpoint.tensors.size()) +
                    " tensors, model needs " + std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, tensor] = checkpoint.tensors[i];
    if (name != params[i].name)
      throw DataError("checkpoint tensor '" + name + "' where '" + params[i].name +
                      "' expected");
    if (!tensor.same_shape(*params[i].value))
      throw DataError("checkpoint tensor '" + name + "' has shape " +
                      shape_string(tensor.shape()) + ", model needs " +
                      shape_string(params[i].value->shape()));
    *params[i].value = tensor;
  }
  return model;
}

}  // namespace rpn
