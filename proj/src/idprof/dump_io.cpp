#include "idprof/dump_io.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>

#include "idprof/error.hpp"

namespace idprof {

namespace {

constexpr char kMagic[4] = {'I', 'D', 'C', 'D'};
constexpr std::size_t kFixedHeader = 4 + 2 + 1 + 1 + 8 + 8 + 2;

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class T>
T load_le(const unsigned char* p) {
  T v = 0;
  for (std::size_t k = 0; k < sizeof(T); ++k) v |= static_cast<T>(T(p[k]) << (8 * k));
  return v;
}

template <class T>
void store_le(unsigned char* p, T v) {
  for (std::size_t k = 0; k < sizeof(T); ++k) p[k] = static_cast<unsigned char>(v >> (8 * k));
}

template <class F>
F decode(const unsigned char* p) {
  using U = std::conditional_t<sizeof(F) == 4, std::uint32_t, std::uint64_t>;
  return std::bit_cast<F>(load_le<U>(p));
}

template <class F>
void encode(unsigned char* p, F v) {
  using U = std::conditional_t<sizeof(F) == 4, std::uint32_t, std::uint64_t>;
  store_le<U>(p, std::bit_cast<U>(v));
}

std::string io_message(const std::filesystem::path& path, const char* what) {
  return std::string(what) + " '" + path.string() + "': " + std::strerror(errno);
}

}  // namespace

DumpHeader read_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, io_message(path, "cannot open"));
  unsigned char fixed[kFixedHeader];
  in.read(reinterpret_cast<char*>(fixed), 4);
  if (in.gcount() < 4 || std::memcmp(fixed, kMagic, 4) != 0) {
    fail(ErrorCode::BadMagic, "'" + path.string() + "' is not an IDCD file");
  }
  in.read(reinterpret_cast<char*>(fixed + 4), kFixedHeader - 4);
  if (static_cast<std::size_t>(in.gcount()) < kFixedHeader - 4) {
    fail(ErrorCode::TruncatedFile, "'" + path.string() + "': header is truncated");
  }
  DumpHeader h;
  h.version = load_le<std::uint16_t>(fixed + 4);
  if (h.version != kIdcdVersion) {
    fail(ErrorCode::BadMagic, "'" + path.string() + "': unsupported IDCD version " + std::to_string(h.version));
  }
  if (fixed[6] > 1) {
    fail(ErrorCode::BadMagic, "'" + path.string() + "': unknown dtype " + std::to_string(fixed[6]));
  }
  h.dtype = static_cast<DType>(fixed[6]);
  h.n = load_le<std::uint64_t>(fixed + 8);
  h.dim = load_le<std::uint64_t>(fixed + 16);
  const auto name_len = load_le<std::uint16_t>(fixed + 24);
  h.layer_name.resize(name_len);
  in.read(h.layer_name.data(), name_len);
  if (in.gcount() < name_len) {
    fail(ErrorCode::TruncatedFile, "'" + path.string() + "': layer name is truncated");
  }
  h.payload_offset = kFixedHeader + name_len;
  if (h.n == 0) fail(ErrorCode::TruncatedFile, "'" + path.string() + "' holds no rows");
  if (h.dim == 0) fail(ErrorCode::TruncatedFile, "'" + path.string() + "' has zero dimension");

  const std::uint64_t payload = h.n * h.dim * dtype_size(h.dtype);
  if (payload / h.n / dtype_size(h.dtype) != h.dim) {
    fail(ErrorCode::BadMagic, "'" + path.string() + "': declared shape overflows");
  }
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) fail(ErrorCode::IoFailure, "cannot stat '" + path.string() + "': " + ec.message());
  if (size < h.payload_offset + payload) {
    fail(ErrorCode::TruncatedFile, "'" + path.string() + "': expected " +
                                       std::to_string(h.payload_offset + payload) + " bytes, found " +
                                       std::to_string(size));
  }
  return h;
}

DumpFile::DumpFile(const std::filesystem::path& path) : path_(path), header_(read_header(path)) {
  fd_ = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
  if (fd_ < 0) fail(ErrorCode::IoFailure, io_message(path, "cannot open"));
}

DumpFile::~DumpFile() {
  if (fd_ >= 0) ::close(fd_);
}

std::uint64_t DumpFile::read_overhead(std::size_t cols) const {
  return std::uint64_t{cols} * dtype_size(header_.dtype);
}

void DumpFile::read(std::size_t row, std::size_t col, std::span<double> out) const {
  const std::size_t elem = dtype_size(header_.dtype);
  std::vector<unsigned char> raw(out.size() * elem);
  const std::uint64_t offset = header_.payload_offset + (std::uint64_t{row} * header_.dim + col) * elem;
  std::size_t done = 0;
  while (done < raw.size()) {
    const ssize_t got = ::pread(fd_, raw.data() + done, raw.size() - done,
                                static_cast<off_t>(offset + done));
    if (got < 0) {
      if (errno == EINTR) continue;
      fail(ErrorCode::IoFailure, io_message(path_, "read failed on"));
    }
    if (got == 0) fail(ErrorCode::TruncatedFile, "'" + path_.string() + "' ended early");
    done += static_cast<std::size_t>(got);
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    const unsigned char* p = raw.data() + k * elem;
    out[k] = header_.dtype == DType::F32 ? static_cast<double>(decode<float>(p)) : decode<double>(p);
    if (!std::isfinite(out[k])) {
      fail(ErrorCode::NonFiniteValue, "'" + path_.string() + "': non-finite value at row " +
                                          std::to_string(row) + ", column " + std::to_string(col + k));
    }
  }
}

DumpWriter::DumpWriter(const std::filesystem::path& path, const std::string& layer_name,
                       std::uint64_t n, std::uint64_t dim, DType dtype)
    : path_(path), n_(n), dim_(dim), dtype_(dtype) {
  if (layer_name.size() > UINT16_MAX) fail(ErrorCode::InvalidArgument, "layer name is too long");
  file_ = std::fopen(path.c_str(), "wb");
  if (!file_) fail(ErrorCode::IoFailure, io_message(path, "cannot create"));
  unsigned char fixed[kFixedHeader] = {};
  std::memcpy(fixed, kMagic, 4);
  store_le<std::uint16_t>(fixed + 4, kIdcdVersion);
  fixed[6] = static_cast<unsigned char>(dtype);
  fixed[7] = 0;
  store_le<std::uint64_t>(fixed + 8, n);
  store_le<std::uint64_t>(fixed + 16, dim);
  store_le<std::uint16_t>(fixed + 24, static_cast<std::uint16_t>(layer_name.size()));
  put(fixed, kFixedHeader);
  put(layer_name.data(), layer_name.size());
}

DumpWriter::~DumpWriter() {
  if (file_) std::fclose(file_);
}

void DumpWriter::put(const void* data, std::size_t bytes) {
  if (bytes != 0 && std::fwrite(data, 1, bytes, file_) != bytes) {
    fail(ErrorCode::IoFailure, io_message(path_, "write failed on"));
  }
}

void DumpWriter::write_row(std::span<const double> row) {
  if (row.size() != dim_) fail(ErrorCode::InvalidArgument, "row length does not match dump dimension");
  if (written_ >= n_) fail(ErrorCode::InvalidArgument, "more rows than declared");
  const std::size_t elem = dtype_size(dtype_);
  scratch_.resize(row.size() * elem);
  for (std::size_t k = 0; k < row.size(); ++k) {
    if (dtype_ == DType::F32) {
      const auto v = static_cast<float>(row[k]);
      if (!std::isfinite(v)) {
        fail(ErrorCode::InvalidArgument, "value at column " + std::to_string(k) + " overflows float32");
      }
      encode<float>(scratch_.data() + k * elem, v);
    } else {
      encode<double>(scratch_.data() + k * elem, row[k]);
    }
  }
  put(scratch_.data(), scratch_.size());
  ++written_;
}

void DumpWriter::write_row(std::span<const float> row) {
  if (row.size() != dim_) fail(ErrorCode::InvalidArgument, "row length does not match dump dimension");
  if (written_ >= n_) fail(ErrorCode::InvalidArgument, "more rows than declared");
  const std::size_t elem = dtype_size(dtype_);
  scratch_.resize(row.size() * elem);
  for (std::size_t k = 0; k < row.size(); ++k) {
    if (dtype_ == DType::F32) {
      encode<float>(scratch_.data() + k * elem, row[k]);
    } else {
      encode<double>(scratch_.data() + k * elem, static_cast<double>(row[k]));
    }
  }
  put(scratch_.data(), scratch_.size());
  ++written_;
}

void DumpWriter::close() {
  if (!file_) return;
  if (written_ != n_) {
    fail(ErrorCode::IoFailure, "'" + path_.string() + "': wrote " + std::to_string(written_) +
                                   " of " + std::to_string(n_) + " rows");
  }
  const bool ok = std::fflush(file_) == 0;
  const bool closed = std::fclose(file_) == 0;
  file_ = nullptr;
  if (!ok || !closed) fail(ErrorCode::IoFailure, io_message(path_, "cannot finish"));
}

namespace {

ActivationDump read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, io_message(path, "cannot open"));
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::TruncatedFile, "'" + path.string() + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto comma = line.rfind(',');
  std::size_t dim = 0;
  if (comma == std::string::npos ||
      std::from_chars(line.data() + comma + 1, line.data() + line.size(), dim).ec != std::errc{} ||
      dim == 0) {
    fail(ErrorCode::BadMagic, "'" + path.string() + "': header must be '<layer>,<dim>'");
  }
  ActivationDump dump;
  dump.layer_name = line.substr(0, comma);

  std::vector<double> data;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    for (std::size_t col = 0; col < dim; ++col) {
      while (p < end && *p == ' ') ++p;
      double v = 0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc{} || !std::isfinite(v)) {
        fail(ErrorCode::NonFiniteValue, "'" + path.string() + "': invalid value at row " +
                                            std::to_string(row) + ", column " + std::to_string(col));
      }
      data.push_back(v);
      p = next;
      while (p < end && *p == ' ') ++p;
      if (col + 1 < dim) {
        if (p == end || *p != ',') {
          fail(ErrorCode::TruncatedFile, "'" + path.string() + "': row " + std::to_string(row) +
                                             " has fewer than " + std::to_string(dim) + " values");
        }
        ++p;
      }
    }
    if (p != end) {
      fail(ErrorCode::TruncatedFile, "'" + path.string() + "': row " + std::to_string(row) +
                                         " has more than " + std::to_string(dim) + " values");
    }
    ++row;
  }
  if (row == 0) fail(ErrorCode::TruncatedFile, "'" + path.string() + "' holds no rows");
  dump.cloud = PointCloud(row, dim, std::move(data));
  return dump;
}

}  // namespace

ActivationDump read_dump(const std::filesystem::path& path) {
  if (path.extension() == ".csv") return read_csv(path);
  DumpFile file(path);
  const std::size_t n = file.rows();
  const std::size_t dim = file.dim();
  std::vector<double> data(n * dim);
  for (std::size_t i = 0; i < n; ++i) file.read(i, 0, std::span<double>(data.data() + i * dim, dim));
  return ActivationDump{file.header().layer_name, PointCloud(n, dim, std::move(data))};
}

void write_dump(const ActivationDump& dump, const std::filesystem::path& path, DType dtype) {
  const PointCloud& cloud = dump.cloud;
  DumpWriter writer(path, dump.layer_name, cloud.size(), cloud.dim(), dtype);
  for (std::size_t i = 0; i < cloud.size(); ++i) writer.write_row(cloud.row(i));
  writer.close();
}

}  // namespace idprof
