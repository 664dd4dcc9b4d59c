#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "densctl/matrix.hpp"
#include "densctl/mlp.hpp"

// Binary formats, all little-endian:
//
//   FVEC1  "FVEC1\0" u32 N, u32 D, N·D f32 row-major
//   DENS1  "DENS1\0" u32 N, u32 k, u32 n, N f64
//   MLPW1  "MLPW1\0" u8 hidden activation, u8 output activation, u32 L,
//          L × u32 layer sizes, then per layer: in·out f32 weights (in × out,
//          row-major) followed by out f32 biases.
//
// Readers validate the magic, reject truncated payloads, and never return a
// partially filled object.

namespace densctl::io {

struct DensityFile {
  std::vector<double> densities;
  std::uint32_t k = 0;
  std::uint32_t n = 0;
};

void write_fvec(std::ostream& out, const Matrix& m);
Matrix read_fvec(std::istream& in);
void write_dens(std::ostream& out, const DensityFile& d);
DensityFile read_dens(std::istream& in);
void write_mlpw(std::ostream& out, const Mlp& net);
Mlp read_mlpw(std::istream& in);

void write_fvec(const std::filesystem::path& path, const Matrix& m);
Matrix read_fvec(const std::filesystem::path& path);
void write_dens(const std::filesystem::path& path, const DensityFile& d);
DensityFile read_dens(const std::filesystem::path& path);
void write_mlpw(const std::filesystem::path& path, const Mlp& net);
Mlp read_mlpw(const std::filesystem::path& path);

/// One sample per line, comma-separated. A first line that does not parse as
/// numbers is treated as a header.
Matrix read_csv(std::istream& in);
Matrix read_csv(const std::filesystem::path& path);

/// FVEC1 by magic, otherwise CSV.
Matrix read_features(const std::filesystem::path& path);

}  // namespace densctl::io
