#ifndef LICO_WAV_HPP_
#define LICO_WAV_HPP_

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "lico/error.hpp"

namespace lico {

struct WavData {
  int sample_rate = 16000;
  std::vector<std::int16_t> samples;
};

namespace detail {

inline std::uint32_t read_le32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}
inline std::uint16_t read_le16(const unsigned char* p) { return std::uint16_t(p[0] | p[1] << 8); }

inline void put_le32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}
inline void put_le16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

}  // namespace detail

/// RIFF/WAVE, PCM16, mono only.
inline WavData parse_wav(const std::vector<unsigned char>& bytes) {
  using detail::read_le16;
  using detail::read_le32;
  require(bytes.size() >= 12 && std::memcmp(bytes.data(), "RIFF", 4) == 0 && std::memcmp(bytes.data() + 8, "WAVE", 4) == 0,
          ErrorKind::kParse, "not a RIFF/WAVE file");
  WavData wav;
  bool have_fmt = false;
  bool have_data = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    const std::uint32_t len = read_le32(hdr + 4);
    const std::size_t body = pos + 8;
    require(body + len <= bytes.size(), ErrorKind::kTruncated, "WAV chunk runs past end of file");
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      require(len >= 16, ErrorKind::kParse, "short fmt chunk");
      const unsigned char* f = bytes.data() + body;
      require(read_le16(f) == 1, ErrorKind::kParse, "WAV is not PCM");
      require(read_le16(f + 2) == 1, ErrorKind::kParse, "WAV must be mono");
      wav.sample_rate = static_cast<int>(read_le32(f + 4));
      require(read_le16(f + 14) == 16, ErrorKind::kParse, "WAV must be 16-bit");
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      require(have_fmt, ErrorKind::kParse, "data chunk before fmt chunk");
      wav.samples.resize(len / 2);
      for (std::size_t i = 0; i < wav.samples.size(); ++i)
        wav.samples[i] = static_cast<std::int16_t>(read_le16(bytes.data() + body + 2 * i));
      have_data = true;
    }
    pos = body + len + (len & 1u);
  }
  require(have_fmt && have_data, ErrorKind::kParse, "WAV is missing fmt or data chunk");
  return wav;
}

inline WavData read_wav(const std::string& path, int expected_rate = 16000) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::kIo, "cannot open '" + path + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  WavData wav = parse_wav(bytes);
  require(wav.sample_rate == expected_rate, ErrorKind::kParse,
          path + ": sample rate " + std::to_string(wav.sample_rate) + " Hz, expected " + std::to_string(expected_rate));
  return wav;
}

inline std::vector<unsigned char> encode_wav(const WavData& wav) {
  using detail::put_le16;
  using detail::put_le32;
  std::vector<unsigned char> out;
  const auto data_len = static_cast<std::uint32_t>(wav.samples.size() * 2);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_le32(out, 36 + data_len);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_le32(out, 16);
  put_le16(out, 1);
  put_le16(out, 1);
  put_le32(out, static_cast<std::uint32_t>(wav.sample_rate));
  put_le32(out, static_cast<std::uint32_t>(wav.sample_rate) * 2);
  put_le16(out, 2);
  put_le16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_le32(out, data_len);
  for (std::int16_t s : wav.samples) put_le16(out, static_cast<std::uint16_t>(s));
  return out;
}

inline void write_wav(const std::string& path, const WavData& wav) {
  const auto bytes = encode_wav(wav);
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::kIo, "cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(out.good(), ErrorKind::kIo, "write to '" + path + "' failed");
}

}  // namespace lico

#endif  // LICO_WAV_HPP_
