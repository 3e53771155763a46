#include "cvsim/rng.hpp"

namespace cvsim {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

std::uint64_t fnv1a(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

RngStream RngStream::split(std::uint64_t master, std::uint64_t shot, std::string_view label) {
  return RngStream(splitmix64(splitmix64(master ^ splitmix64(shot)) ^ fnv1a(label)));
}

}  // namespace cvsim
