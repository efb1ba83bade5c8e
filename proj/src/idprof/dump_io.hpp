#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "idprof/neighbors.hpp"
#include "idprof/point_cloud.hpp"

namespace idprof {

// IDCD layout, little-endian:
//   "IDCD" | version u16 = 1 | dtype u8 (0 = f32, 1 = f64) | reserved u8 = 0 |
//   n u64 | dim u64 | name length u16 | name bytes (UTF-8) | n * dim values, row-major
enum class DType : std::uint8_t { F32 = 0, F64 = 1 };

inline constexpr std::uint16_t kIdcdVersion = 1;

inline std::size_t dtype_size(DType t) noexcept { return t == DType::F32 ? 4 : 8; }

struct ActivationDump {
  std::string layer_name;
  PointCloud cloud;
};

struct DumpHeader {
  std::uint16_t version = kIdcdVersion;
  DType dtype = DType::F64;
  std::uint64_t n = 0;
  std::uint64_t dim = 0;
  std::string layer_name;
  std::uint64_t payload_offset = 0;
};

// Throws IoFailure, BadMagic or TruncatedFile (also for n == 0 and for files
// shorter than the declared payload).
DumpHeader read_header(const std::filesystem::path& path);

// Streams rows of an IDCD file with pread; only the requested columns are
// ever resident. Non-finite values raise NonFiniteValue with row and column.
class DumpFile final : public RowSource {
 public:
  explicit DumpFile(const std::filesystem::path& path);
  ~DumpFile() override;
  DumpFile(const DumpFile&) = delete;
  DumpFile& operator=(const DumpFile&) = delete;

  const DumpHeader& header() const noexcept { return header_; }
  std::size_t rows() const override { return static_cast<std::size_t>(header_.n); }
  std::size_t dim() const override { return static_cast<std::size_t>(header_.dim); }
  void read(std::size_t row, std::size_t col, std::span<double> out) const override;
  std::uint64_t read_overhead(std::size_t cols) const override;

 private:
  std::filesystem::path path_;
  DumpHeader header_;
  int fd_ = -1;
};

// Incremental IDCD writer for dumps too large to hold in memory.
class DumpWriter {
 public:
  DumpWriter(const std::filesystem::path& path, const std::string& layer_name, std::uint64_t n,
             std::uint64_t dim, DType dtype);
  ~DumpWriter();
  DumpWriter(const DumpWriter&) = delete;
  DumpWriter& operator=(const DumpWriter&) = delete;

  void write_row(std::span<const double> row);
  void write_row(std::span<const float> row);
  // Throws IoFailure if fewer than n rows were written.
  void close();

 private:
  void put(const void* data, std::size_t bytes);

  std::filesystem::path path_;
  std::FILE* file_ = nullptr;
  std::uint64_t n_;
  std::uint64_t dim_;
  DType dtype_;
  std::uint64_t written_ = 0;
  std::vector<unsigned char> scratch_;
};

// IDCD by magic; files ending in ".csv" are parsed as CSV whose first line is
// "<layer name>,<dim>" followed by one comma-separated row per point.
ActivationDump read_dump(const std::filesystem::path& path);

void write_dump(const ActivationDump& dump, const std::filesystem::path& path,
                DType dtype = DType::F64);

}  // namespace idprof
