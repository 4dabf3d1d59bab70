#pragma once

// Shared primitives: node ids, I/O counters, 4KB page arithmetic, little-endian
// binary file helpers and the seedable RNG used by every randomized component.

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <fcntl.h>
#include <unistd.h>

namespace gx {

using NodeId = std::uint64_t;

constexpr std::uint64_t kPageSize = 4096;

// ---------------------------------------------------------------------------
// I/O accounting
// ---------------------------------------------------------------------------

/// Counters for storage traffic, kept per worker and merged. All reads of
/// graph or feature data go through code paths that update one of these.
struct IoStats {
    std::uint64_t pages_read = 0;
    std::uint64_t rows_read = 0;
    std::uint64_t neighbor_lists_read = 0;
    std::uint64_t bytes_read = 0;

    IoStats& operator+=(const IoStats& o) {
        pages_read += o.pages_read;
        rows_read += o.rows_read;
        neighbor_lists_read += o.neighbor_lists_read;
        bytes_read += o.bytes_read;
        return *this;
    }
};

/// Number of distinct pages overlapping the byte range [lo, hi).
inline std::uint64_t pages_touched(std::uint64_t lo, std::uint64_t hi,
                                   std::uint64_t page_size = kPageSize) {
    if (hi <= lo) return 0;
    return (hi - 1) / page_size - lo / page_size + 1;
}

/// Distinct pages covering row `row_index` of a table with `row_bytes`-wide
/// rows packed back to back from a page-aligned origin.
inline std::uint64_t page_count_for_row(std::uint64_t row_bytes, std::uint64_t row_index,
                                        std::uint64_t page_size = kPageSize) {
    if (row_bytes == 0) throw std::invalid_argument("page_count_for_row: row_bytes must be > 0");
    const std::uint64_t lo = row_index * row_bytes;
    return pages_touched(lo, lo + row_bytes, page_size);
}

// ---------------------------------------------------------------------------
// RNG: SplitMix64. Fully specified here so sampling is reproducible across
// platforms and standard library implementations.
// ---------------------------------------------------------------------------

class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform draw from [0, n) via 128-bit multiply-shift. n must be > 0.
    std::uint64_t bounded(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next()) * n) >> 64);
    }

private:
    std::uint64_t state_;
};

/// SplitMix64 finalizer as a standalone mixing function.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Derives an independent stream seed from a base seed and an index
/// (e.g. per-batch or per-epoch seeds).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    return mix64(base ^ mix64(index));
}

// ---------------------------------------------------------------------------
// Little-endian binary file helpers
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline std::uint32_t get_u32(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}
inline std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

} // namespace detail

/// Buffered little-endian writer. Writes to a temp image in memory only for
/// small headers; bulk arrays stream straight through. Throws on any failure.
class BinWriter {
public:
    explicit BinWriter(const std::filesystem::path& path)
        : path_(path), f_(std::fopen(path.string().c_str(), "wb")) {
        if (!f_) throw std::runtime_error("cannot open for write: " + path.string());
    }
    ~BinWriter() {
        if (f_) std::fclose(f_);
    }
    BinWriter(const BinWriter&) = delete;
    BinWriter& operator=(const BinWriter&) = delete;

    void magic(const char m[8]) { raw(m, 8); }
    void u32(std::uint32_t v) {
        std::string b;
        detail::put_u32(b, v);
        raw(b.data(), b.size());
    }
    void u64(std::uint64_t v) {
        std::string b;
        detail::put_u64(b, v);
        raw(b.data(), b.size());
    }
    void u64_array(std::span<const std::uint64_t> a) {
        // Host is assumed little-endian for bulk paths; encode explicitly
        // element-wise otherwise.
        if constexpr (std::endian::native == std::endian::little) {
            raw(a.data(), a.size_bytes());
        } else {
            for (auto v : a) u64(v);
        }
    }
    void i64_array(std::span<const std::int64_t> a) {
        if constexpr (std::endian::native == std::endian::little) {
            raw(a.data(), a.size_bytes());
        } else {
            for (auto v : a) u64(static_cast<std::uint64_t>(v));
        }
    }
    void f32_array(std::span<const float> a) {
        static_assert(sizeof(float) == 4);
        raw(a.data(), a.size_bytes());
    }
    void raw(const void* p, std::size_t n) {
        if (n && std::fwrite(p, 1, n, f_) != n)
            throw std::runtime_error("short write: " + path_.string());
    }
    std::uint64_t tell() const { return static_cast<std::uint64_t>(std::ftell(f_)); }
    /// Zero-pads to the next multiple of `align`.
    void pad_to(std::uint64_t align) {
        std::uint64_t pos = tell();
        std::uint64_t rem = pos % align;
        if (rem == 0) return;
        std::vector<char> zeros(align - rem, 0);
        raw(zeros.data(), zeros.size());
    }
    void close() {
        if (f_) {
            if (std::fclose(f_) != 0) {
                f_ = nullptr;
                throw std::runtime_error("close failed: " + path_.string());
            }
            f_ = nullptr;
        }
    }

private:
    std::filesystem::path path_;
    std::FILE* f_;
};

/// Reader for runtime files and file headers; validates magic/lengths and
/// throws a format error on any mismatch or truncation. Reads the whole file
/// by default, or only a bounded prefix (for headers of large payload files).
class BinReader {
public:
    explicit BinReader(const std::filesystem::path& path,
                       std::size_t max_bytes = ~std::size_t{0})
        : path_(path) {
        std::FILE* f = std::fopen(path.string().c_str(), "rb");
        if (!f) throw std::runtime_error("cannot open: " + path.string());
        std::fseek(f, 0, SEEK_END);
        long n = std::ftell(f);
        std::fseek(f, 0, SEEK_SET);
        buf_.resize(std::min(static_cast<std::size_t>(n), max_bytes));
        if (!buf_.empty() && std::fread(buf_.data(), 1, buf_.size(), f) != buf_.size()) {
            std::fclose(f);
            throw std::runtime_error("short read: " + path.string());
        }
        std::fclose(f);
    }

    void expect_magic(const char m[8]) {
        if (remaining() < 8 || std::memcmp(buf_.data() + pos_, m, 8) != 0)
            throw std::runtime_error("bad magic in " + path_.string() + " (expected " +
                                     std::string(m, 8) + ")");
        pos_ += 8;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = detail::get_u32(buf_.data() + pos_);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = detail::get_u64(buf_.data() + pos_);
        pos_ += 8;
        return v;
    }
    std::vector<std::uint64_t> u64_array(std::size_t count) {
        need(count * 8);
        std::vector<std::uint64_t> out(count);
        if (count == 0) return out;
        if constexpr (std::endian::native == std::endian::little) {
            std::memcpy(out.data(), buf_.data() + pos_, count * 8);
        } else {
            for (std::size_t i = 0; i < count; ++i)
                out[i] = detail::get_u64(buf_.data() + pos_ + 8 * i);
        }
        pos_ += count * 8;
        return out;
    }
    std::vector<std::int64_t> i64_array(std::size_t count) {
        auto u = u64_array(count);
        std::vector<std::int64_t> out(u.size());
        if (!u.empty()) std::memcpy(out.data(), u.data(), u.size() * 8);
        return out;
    }
    std::size_t remaining() const { return buf_.size() - pos_; }
    void need(std::size_t n) const {
        if (remaining() < n) throw std::runtime_error("truncated file: " + path_.string());
    }

private:
    std::filesystem::path path_;
    std::vector<unsigned char> buf_;
    std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Positional-read file handle (pread-based, shareable by concurrent readers)
// ---------------------------------------------------------------------------

class PreadFile {
public:
    PreadFile() = default;
    explicit PreadFile(const std::filesystem::path& path) {
        fd_ = ::open(path.string().c_str(), O_RDONLY);
        if (fd_ < 0) throw std::runtime_error("cannot open: " + path.string());
        path_ = path;
    }
    ~PreadFile() { reset(); }
    PreadFile(PreadFile&& o) noexcept : fd_(o.fd_), path_(std::move(o.path_)) { o.fd_ = -1; }
    PreadFile& operator=(PreadFile&& o) noexcept {
        if (this != &o) {
            reset();
            fd_ = o.fd_;
            path_ = std::move(o.path_);
            o.fd_ = -1;
        }
        return *this;
    }
    PreadFile(const PreadFile&) = delete;
    PreadFile& operator=(const PreadFile&) = delete;

    void read_at(void* dst, std::size_t n, std::uint64_t offset) const {
        std::size_t done = 0;
        while (done < n) {
            ssize_t r = ::pread(fd_, static_cast<char*>(dst) + done, n - done,
                                static_cast<off_t>(offset + done));
            if (r < 0) throw std::runtime_error("pread failed: " + path_.string());
            if (r == 0) throw std::runtime_error("truncated file: " + path_.string());
            done += static_cast<std::size_t>(r);
        }
    }
    std::uint64_t size() const {
        off_t end = ::lseek(fd_, 0, SEEK_END);
        if (end < 0) throw std::runtime_error("lseek failed: " + path_.string());
        return static_cast<std::uint64_t>(end);
    }
    bool open() const { return fd_ >= 0; }

private:
    void reset() {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }
    int fd_ = -1;
    std::filesystem::path path_;
};

} // namespace gx
