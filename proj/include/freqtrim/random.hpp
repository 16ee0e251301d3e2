#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace freqtrim {

using Engine = std::mt19937_64;

/// SplitMix64 finalizer. Used to turn structured (seed, key) pairs into
/// well-separated engine seeds.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Stable 64-bit FNV-1a hash of a string (qubit ids, file contents).
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

/// Derive a child seed from a parent seed and a key. Pure function of its
/// inputs; independent of call order.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key) noexcept;
std::uint64_t derive_seed(std::uint64_t seed, std::string_view key) noexcept;

inline Engine make_engine(std::uint64_t seed) { return Engine(seed); }

// Salts separating independent random streams of one qubit.
namespace stream {
inline constexpr std::uint64_t fabrication = 0x6661627269636174ULL;
inline constexpr std::uint64_t relaxation = 0x72656c6178617469ULL;
inline constexpr std::uint64_t steps = 0x7374657073747270ULL;
inline constexpr std::uint64_t measurement = 0x6d65617375726521ULL;
}  // namespace stream

}  // namespace freqtrim
