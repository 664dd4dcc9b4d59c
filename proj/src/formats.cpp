#include "densctl/formats.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

namespace densctl::io {
namespace {

constexpr std::size_t kMagicLen = 6;
constexpr std::array<char, kMagicLen> kFvecMagic{'F', 'V', 'E', 'C', '1', '\0'};
constexpr std::array<char, kMagicLen> kDensMagic{'D', 'E', 'N', 'S', '1', '\0'};
constexpr std::array<char, kMagicLen> kMlpwMagic{'M', 'L', 'P', 'W', '1', '\0'};

// Upper bound on any element count read from a header; keeps a corrupted size
// field from triggering a huge allocation.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
  const U bits = std::bit_cast<U>(value);
  std::array<char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(std::istream& in, const char* what) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
  std::array<unsigned char, sizeof(T)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    fail(ErrorKind::Format, std::string(what) + ": truncated file");
  }
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<U>(bytes[i]) << (8 * i);
  return std::bit_cast<T>(bits);
}

void put_magic(std::ostream& out, const std::array<char, kMagicLen>& magic) {
  out.write(magic.data(), magic.size());
}

void expect_magic(std::istream& in, const std::array<char, kMagicLen>& magic, const char* what) {
  std::array<char, kMagicLen> got{};
  in.read(got.data(), got.size());
  require(in.gcount() == static_cast<std::streamsize>(got.size()) && got == magic, ErrorKind::Format,
          std::string(what) + ": bad magic");
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  require(v <= std::numeric_limits<std::uint32_t>::max(), ErrorKind::Format,
          std::string(what) + ": dimension overflows u32");
  return static_cast<std::uint32_t>(v);
}

void check_written(std::ostream& out, const char* what) {
  if (!out) fail(ErrorKind::Io, std::string(what) + ": write failed");
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.is_open(), ErrorKind::Io, "cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.is_open(), ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  return out;
}

}  // namespace

void write_fvec(std::ostream& out, const Matrix& m) {
  put_magic(out, kFvecMagic);
  put_le(out, checked_u32(m.rows(), "FVEC1"));
  put_le(out, checked_u32(m.cols(), "FVEC1"));
  for (float v : m.data()) put_le(out, v);
  check_written(out, "FVEC1");
}

Matrix read_fvec(std::istream& in) {
  expect_magic(in, kFvecMagic, "FVEC1");
  const auto rows = get_le<std::uint32_t>(in, "FVEC1");
  const auto cols = get_le<std::uint32_t>(in, "FVEC1");
  const std::uint64_t count = std::uint64_t{rows} * cols;
  require(count < kMaxElements, ErrorKind::Format, "FVEC1: dimension overflow");
  std::vector<float> data(count);
  for (auto& v : data) v = get_le<float>(in, "FVEC1");
  return Matrix(rows, cols, std::move(data));
}

void write_dens(std::ostream& out, const DensityFile& d) {
  put_magic(out, kDensMagic);
  put_le(out, checked_u32(d.densities.size(), "DENS1"));
  put_le(out, d.k);
  put_le(out, d.n);
  for (double v : d.densities) put_le(out, v);
  check_written(out, "DENS1");
}

DensityFile read_dens(std::istream& in) {
  expect_magic(in, kDensMagic, "DENS1");
  DensityFile d;
  const auto n = get_le<std::uint32_t>(in, "DENS1");
  d.k = get_le<std::uint32_t>(in, "DENS1");
  d.n = get_le<std::uint32_t>(in, "DENS1");
  std::vector<double> values(n);
  for (auto& v : values) v = get_le<double>(in, "DENS1");
  d.densities = std::move(values);
  return d;
}

void write_mlpw(std::ostream& out, const Mlp& net) {
  put_magic(out, kMlpwMagic);
  put_le(out, static_cast<std::uint8_t>(net.hidden_activation()));
  put_le(out, static_cast<std::uint8_t>(net.output_activation()));
  put_le(out, checked_u32(net.layer_sizes().size(), "MLPW1"));
  for (std::size_t s : net.layer_sizes()) put_le(out, checked_u32(s, "MLPW1"));
  for (const auto& layer : net.layers()) {
    for (float v : layer.weight.data()) put_le(out, v);
    for (float v : layer.bias) put_le(out, v);
  }
  check_written(out, "MLPW1");
}

Mlp read_mlpw(std::istream& in) {
  expect_magic(in, kMlpwMagic, "MLPW1");
  const auto hidden = get_le<std::uint8_t>(in, "MLPW1");
  const auto output = get_le<std::uint8_t>(in, "MLPW1");
  require(hidden <= 3 && output <= 3, ErrorKind::Format, "MLPW1: unknown activation code");
  const auto count = get_le<std::uint32_t>(in, "MLPW1");
  require(count >= 2 && count < 1024, ErrorKind::Format, "MLPW1: implausible layer count");
  std::vector<std::size_t> sizes(count);
  std::uint64_t params = 0;
  for (auto& s : sizes) {
    s = get_le<std::uint32_t>(in, "MLPW1");
    require(s >= 1 && s < kMaxElements, ErrorKind::Format, "MLPW1: bad layer size");
  }
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) params += std::uint64_t{sizes[l]} * sizes[l + 1] + sizes[l + 1];
  require(params < kMaxElements, ErrorKind::Format, "MLPW1: dimension overflow");
  Mlp net(sizes, static_cast<Activation>(hidden), static_cast<Activation>(output));
  for (auto& layer : net.layers()) {
    for (float& v : layer.weight.data()) v = get_le<float>(in, "MLPW1");
    for (float& v : layer.bias) v = get_le<float>(in, "MLPW1");
  }
  return net;
}

void write_fvec(const std::filesystem::path& path, const Matrix& m) {
  auto out = open_out(path);
  write_fvec(out, m);
}
Matrix read_fvec(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_fvec(in);
}
void write_dens(const std::filesystem::path& path, const DensityFile& d) {
  auto out = open_out(path);
  write_dens(out, d);
}
DensityFile read_dens(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_dens(in);
}
void write_mlpw(const std::filesystem::path& path, const Mlp& net) {
  auto out = open_out(path);
  write_mlpw(out, net);
}
Mlp read_mlpw(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_mlpw(in);
}

Matrix read_csv(std::istream& in) {
  Matrix m;
  std::string line;
  std::vector<float> row;
  bool first = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    row.clear();
    std::stringstream ss(line);
    std::string cell;
    bool ok = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        const float v = std::stof(cell, &used);
        if (cell.find_first_not_of(" \t", used) != std::string::npos) ok = false;
        row.push_back(v);
      } catch (const std::exception&) {
        ok = false;
      }
      if (!ok) break;
    }
    if (!ok) {
      require(first, ErrorKind::Format, "CSV: unparsable value on line " + std::to_string(line_no));
      first = false;
      continue;
    }
    first = false;
    require(m.rows() == 0 || row.size() == m.cols(), ErrorKind::Format,
            "CSV: ragged row on line " + std::to_string(line_no));
    m.append_row(row);
  }
  require(m.rows() > 0, ErrorKind::Format, "CSV: no data rows");
  return m;
}

Matrix read_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_csv(in);
}

Matrix read_features(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::array<char, kMagicLen> head{};
  in.read(head.data(), head.size());
  const bool is_fvec = in.gcount() == static_cast<std::streamsize>(head.size()) && head == kFvecMagic;
  in.clear();
  in.seekg(0);
  return is_fvec ? read_fvec(in) : read_csv(in);
}

}  // namespace densctl::io
