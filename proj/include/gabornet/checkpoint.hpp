#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gabornet/data.hpp"
#include "gabornet/network.hpp"
#include "gabornet/optim.hpp"

namespace gabornet {

// "GNET1" checkpoint layout, all integers little-endian:
//   magic "GNET1" (5 bytes)
//   repeated record:
//     u32 name length, UTF-8 name,
//     u8 rank, rank x u32 dims,
//     prod(dims) x f64 payload (one value when rank is 0)

enum class CheckpointErrorCode { kIo = 1, kBadMagic, kTruncated, kShapeMismatch, kMissingTensor };

class CheckpointError : public std::runtime_error {
 public:
  CheckpointError(CheckpointErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  CheckpointErrorCode code() const { return code_; }

 private:
  CheckpointErrorCode code_;
};

struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<double> values;
};

void write_records(const std::filesystem::path& path, const std::vector<NamedTensor>& records);
std::vector<NamedTensor> read_records(const std::filesystem::path& path);

/// Everything besides parameters and optimizer moments needed to resume or
/// evaluate a run.
struct TrainingState {
  int epoch = 0;  // completed epochs
  std::optional<NormStats> normalization;
  std::string config_text;  // resolved config, stored as "meta.config" bytes
  std::vector<std::string> class_names;
};

/// Parameters are stored under their network names (e.g. layer0.gabor_conv.omega);
/// Adam moments under adam.<name>.m / .v / .t.
void save_checkpoint(const std::filesystem::path& path, Network& net, const Optimizer* optimizer,
                     const TrainingState& state);

/// Loads parameters (and Adam state, when optimizer is an Adam) into an
/// already-built network. Shape disagreements raise kShapeMismatch naming the tensor.
TrainingState load_checkpoint(const std::filesystem::path& path, Network& net,
                              Optimizer* optimizer);

/// Reads only the metadata records (no network required).
TrainingState read_checkpoint_state(const std::filesystem::path& path);

}  // namespace gabornet
