#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "rpn/config.hpp"
#include "rpn/model.hpp"
#include "rpn/tensor.hpp"
#include "rpn/text.hpp"

namespace rpn {

// Both binary formats share the header layout
//   magic[8] | u32 version | u64 created_unix | u64 payload_hash | payload
// with every integer and double little-endian. The hash covers exactly the
// payload bytes, so two files differing only in their creation time carry the
// same hash. Malformed files raise ParseError naming the byte offset.

inline constexpr std::uint32_t kDumpFormatVersion = 1;

struct TensorDump {
  Tensor tensor;
  std::uint64_t created_unix = 0;
};

// Payload: u32 rank | u64 dims[rank] | f64 data (row-major).
void write_tensor_dump(const std::filesystem::path& path, const Tensor& tensor,
                       std::uint64_t created_unix);
void write_tensor_dump(const std::filesystem::path& path, const Tensor& tensor);

TensorDump read_tensor_dump(const std::filesystem::path& path);

// Hash field of an existing dump or checkpoint, for timestamp-independent
// file comparison.
std::uint64_t read_payload_hash(const std::filesystem::path& path);

struct Checkpoint {
  KeyValueConfig config;  // includes the model.* shape keys
  Vocabulary vocab;
  std::vector<std::pair<std::string, Tensor>> tensors;  // parameter order
};

// Payload: config lines, vocabulary tokens, then the named parameter tensors.
// The model.* shape keys are injected into the stored config so the model can
// be rebuilt from the file alone.
void write_checkpoint(const std::filesystem::path& path, const TextCnnModel& model,
                      const Vocabulary& vocab, const KeyValueConfig& config,
                      std::uint64_t created_unix);
void write_checkpoint(const std::filesystem::path& path, const TextCnnModel& model,
                      const Vocabulary& vocab, const KeyValueConfig& config);

Checkpoint read_checkpoint(const std::filesystem::path& path);

// Rebuilds the model from the stored shape keys and overwrites every
// parameter bitwise from the stored tensors. Name or shape mismatches are
// data errors.
TextCnnModel restore_model(const Checkpoint& checkpoint);

}  // namespace rpn
