#include "hardedge/rng.hpp"

#include <array>

namespace hardedge {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RngStreamSpec RngStreamSpec::child(std::uint64_t sub_id) const {
  RngStreamSpec out = *this;
  out.stream_id = splitmix64(stream_id ^ splitmix64(sub_id + 0x632be59bd9b4e019ULL));
  return out;
}

Engine make_engine(const RngStreamSpec& spec) {
  const std::uint64_t a = splitmix64(spec.master_seed);
  const std::uint64_t b = splitmix64(a ^ splitmix64(spec.stream_id + 0x5851f42d4c957f2dULL));
  const std::uint64_t c = splitmix64(b);
  const std::uint64_t d = splitmix64(c ^ spec.stream_id);
  std::array<std::uint32_t, 8> words{};
  for (int i = 0; i < 2; ++i) {
    words[i] = static_cast<std::uint32_t>(a >> (32 * i));
    words[2 + i] = static_cast<std::uint32_t>(b >> (32 * i));
    words[4 + i] = static_cast<std::uint32_t>(c >> (32 * i));
    words[6 + i] = static_cast<std::uint32_t>(d >> (32 * i));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Engine(seq);
}

}  // namespace hardedge
