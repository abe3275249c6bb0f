#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgldreg/dataset.hpp"
#include "sgldreg/tensor.hpp"
#include "sgldreg/unet.hpp"

namespace sgldreg {

// Checkpoint layout (little endian):
//   "ASGL" | version u32 | snapshot count u64 |
//   per snapshot: iteration u64 | parameter count u64 |
//     per parameter: id length u32 | id bytes | rank u32 | extents u64 x rank | float64 data
//   | CRC-32 (zlib) of all preceding bytes, u32
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const std::vector<WeightSnapshot>& snapshots);
std::vector<WeightSnapshot> decode_checkpoint(const std::vector<std::uint8_t>& bytes);
void checkpoint_save(const std::vector<WeightSnapshot>& snapshots, const std::string& path);
std::vector<WeightSnapshot> checkpoint_load(const std::string& path);

// Pair dataset written by the synth command (little endian):
//   "SGPR" | version u32 | count u64 | height u32 | width u32 | flags u32 (1 labels, 2 true field) |
//   per pair: moving f32 x HW | fixed f32 x HW | [labels i32 x HW x 2] | [field f32 x 2HW] | CRC-32 u32
std::vector<std::uint8_t> encode_pairs(const std::vector<ImagePair>& pairs);
std::vector<ImagePair> decode_pairs(const std::vector<std::uint8_t>& bytes);
void save_pairs(const std::vector<ImagePair>& pairs, const std::string& path);
std::vector<ImagePair> load_pairs(const std::string& path);

// Binary PGM (P5, maxval 255). Values are clamped to [0,1] and rounded.
void write_pgm(const std::string& path, const Tensor& image);
// Returns a (1,1,H,W) image scaled to [0,1].
Tensor read_pgm(const std::string& path);
// Maps [-bound, bound] (bound = max |v|) linearly onto [0,255].
Tensor normalize_signed(const Tensor& values);
// Maps [0, max] linearly onto [0,1].
Tensor normalize_unsigned(const Tensor& values);

// Headerless little-endian float32 dump.
void write_raw_f32(const std::string& path, const Tensor& values);
std::vector<float> read_raw_f32(const std::string& path);

// Shortest decimal text that parses back to the identical double.
std::string format_number(double value);
double parse_number(const std::string& text);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);
void write_text(const std::string& path, const std::string& text);

}  // namespace sgldreg
