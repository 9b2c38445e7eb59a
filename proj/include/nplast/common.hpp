#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace np {

// Exit codes used by the CLI. Exceptions below map onto them.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitDataError = 3;
inline constexpr int kExitNumericError = 4;

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Deterministic RNG. All sampling goes through these helpers so that results
// are pinned by this code, not by library-specific distribution internals.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n). n must be > 0.
    std::uint64_t next_below(std::uint64_t n) { return eng_() % n; }

    // Standard normal via Box-Muller with a cached spare.
    double next_normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = next_double();
        } while (u1 <= 0.0);
        const double u2 = next_double();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 6.283185307179586 * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        if (v.size() < 2) return;
        for (std::size_t i = v.size() - 1; i > 0; --i) {
            const std::size_t j = static_cast<std::size_t>(next_below(i + 1));
            std::swap(v[i], v[j]);
        }
    }

    // Sample k distinct indices from [0, n), ascending order not guaranteed.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

  private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Stable seed derivation for substreams (epochs, sentences, ...).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

// SHA-256 of a byte buffer, as 32 raw bytes / lowercase hex.
std::vector<std::uint8_t> sha256(const std::uint8_t* data, std::size_t size);
std::string to_hex(const std::vector<std::uint8_t>& bytes);

// Little-endian binary I/O helpers used by the checkpoint and dump formats.
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v);
void put_f32(std::vector<std::uint8_t>& out, float v);
void put_f64(std::vector<std::uint8_t>& out, double v);
void put_string(std::vector<std::uint8_t>& out, const std::string& s);

class ByteReader {
  public:
    ByteReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

    std::uint32_t get_u32();
    std::uint64_t get_u64();
    float get_f32();
    double get_f64();
    std::string get_string();
    void get_raw(std::uint8_t* dst, std::size_t n);
    std::size_t remaining() const { return size_ - pos_; }
    std::size_t pos() const { return pos_; }

  private:
    void need(std::size_t n) const;
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes);
void write_file_text(const std::string& path, const std::string& text);

// Fixed-precision decimal rendering (deterministic, locale-free).
std::string format_fixed(double v, int decimals);

// Runs fn(worker, begin, end) over contiguous chunks of [0, n). The
// partition depends only on (n, n_threads), so writes into disjoint
// preallocated slots stay deterministic under any scheduling.
template <class F>
void parallel_chunks(std::size_t n, std::size_t n_threads, F&& fn) {
    if (n == 0) return;
    const std::size_t workers = std::min(n_threads < 1 ? 1 : n_threads, n);
    if (workers <= 1) {
        fn(std::size_t{0}, std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = n * w / workers;
        const std::size_t end = n * (w + 1) / workers;
        pool.emplace_back([&fn, w, begin, end] { fn(w, begin, end); });
    }
    for (auto& t : pool) t.join();
}

}  // namespace np
