// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "ticktack/alignment.hpp"
#include "ticktack/model.hpp"
#include "ticktack/parameters.hpp"
#include "ticktack/temporal_geometry.hpp"

namespace ticktack {

/// Self-describing tensor container shared by checkpoints and Fisher files.
/// Byte layout (all integers little-endian, see docs/container_format.md):
///
///   "TICKTACK" | u32 version | u32 M | M x (u32 len, key, u32 len, value)
///   | u32 T | T x (u32 len, name, u8 trainable, u32 rows, u32 cols,
///   rows*cols binary64 in row-major order) | u64 FNV-1a of everything before
struct Container {
    static constexpr std::uint32_t kVersion = 1;

    std::map<std::string, std::string> metadata;
    ParameterSet tensors;
};

void write_container(std::ostream& out, const Container& c);
/// Throws Error{ParseError} on a bad magic, version or checksum.
Container read_container(std::istream& in);
void save_container(const std::string& path, const Container& c);
Container load_container(const std::string& path);

struct Checkpoint {
    ModelConfig model;
    EncodingConfig encoding;
    ParameterSet params;
    std::uint64_t seed = 0;
    std::uint64_t step = 0;
    std::vector<std::string> vocabulary;
    std::map<std::string, std::string> extra;  // free-form provenance
};

Container to_container(const Checkpoint& ckpt);
Checkpoint checkpoint_from(const Container& c);

Container to_container(const FisherDiagonal& fisher);
FisherDiagonal fisher_from(const Container& c);

}  // namespace ticktack
