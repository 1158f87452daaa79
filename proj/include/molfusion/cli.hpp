// SPDX-FileCopyrightText: Copyright (c) 2026 The molfusion authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "molfusion/downstream.hpp"
#include "molfusion/encoders.hpp"
#include "molfusion/fusion.hpp"

namespace molfusion::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitCheckpoint = 4;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  enc::EncoderConfig encoder;
  fusion::FusionConfig fusion;
  std::string corpus_path;
  std::vector<std::string> dataset_paths;
  std::string output_dir = ".";
  std::vector<std::uint64_t> seeds{0};
  std::vector<downstream::Aggregation> aggregations{std::begin(downstream::kAllAggregations),
                                                    std::end(downstream::kAllAggregations)};
  // When set, pretrain also runs the ablation grid over dataset_paths.
  bool ablation = false;
};

// Flat `key = value` text; `#` starts a comment at line start or after
// whitespace. Relative paths resolve against `base_dir`.
RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const RunConfig& cfg);

// One SMILES per line, or a CSV whose header has a `smiles` column.
std::vector<std::string> read_corpus(const std::filesystem::path& path);

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

inline constexpr std::string_view kCheckpointMagic = "MOLFUSION-CKPT-v1";

std::string encode_checkpoint(const fusion::FusionModel& model, const RunConfig& cfg);

struct LoadedCheckpoint {
  RunConfig config;
  fusion::FusionModel model;
};

LoadedCheckpoint decode_checkpoint(std::string_view bytes);
void save_checkpoint(const std::filesystem::path& path, const fusion::FusionModel& model, const RunConfig& cfg);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

std::string format_epoch(const fusion::EpochRecord& rec);

// Parses argv-style arguments (without the program name), runs the selected
// subcommand and returns its exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace molfusion::cli
