#include "keytap/wav.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>

#include "keytap/errors.hpp"
#include "keytap/io.hpp"

namespace keytap {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

class ByteReader {
 public:
  explicit ByteReader(const std::string& bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) throw ParseError(std::string("truncated WAV: expected ") + what, pos_);
  }

  std::uint32_t u32() {
    need(4, "4 bytes");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint16_t u16() {
    need(2, "2 bytes");
    const auto v = static_cast<std::uint16_t>(static_cast<unsigned char>(bytes_[pos_]) |
                                              (static_cast<unsigned char>(bytes_[pos_ + 1]) << 8));
    pos_ += 2;
    return v;
  }

  std::string tag() {
    need(4, "chunk tag");
    std::string t = bytes_.substr(pos_, 4);
    pos_ += 4;
    return t;
  }

  void skip(std::size_t n) {
    need(n, "chunk body");
    pos_ += n;
  }

  const char* data() const { return bytes_.data() + pos_; }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

std::string describe(std::uint16_t format, std::uint16_t bits) {
  std::string name = format == kFormatPcm ? "PCM" : format == kFormatFloat ? "IEEE float" : "format tag " + std::to_string(format);
  return name + " " + std::to_string(bits) + "-bit";
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

}  // namespace

AudioBuffer load_wav(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
  const std::string bytes = read_file(path);
  ByteReader r(bytes);

  if (r.tag() != "RIFF") throw ParseError("missing RIFF header", 0);
  r.u32();
  if (r.tag() != "WAVE") throw ParseError("missing WAVE form type", 8);

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;

  while (r.remaining() > 0) {
    const std::size_t chunk_at = r.offset();
    const std::string id = r.tag();
    const std::uint32_t size = r.u32();
    if (id == "fmt ") {
      if (size < 16) throw ParseError("fmt chunk too small", chunk_at);
      r.need(size, "fmt chunk body");
      format = r.u16();
      channels = r.u16();
      rate = r.u32();
      r.u32();  // byte rate
      r.u16();  // block align
      bits = r.u16();
      std::size_t consumed = 16;
      if (format == kFormatExtensible && size >= 40) {
        r.u16();  // cbSize
        r.u16();  // valid bits
        r.u32();  // channel mask
        format = r.u16();  // first two bytes of the sub-format GUID carry the tag
        consumed += 10;
      }
      r.skip(size - consumed + (size & 1));
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw ParseError("data chunk before fmt chunk", chunk_at);
      const bool ok = (format == kFormatPcm && (bits == 16 || bits == 32)) ||
                      (format == kFormatFloat && bits == 32);
      if (!ok) throw UnsupportedEncodingError(describe(format, bits));
      if (channels == 0) throw ParseError("zero channels", chunk_at);
      if (rate == 0) throw ParseError("zero sample rate", chunk_at);

      const std::size_t frame_bytes = static_cast<std::size_t>(channels) * (bits / 8);
      r.need(size, "data chunk body");
      if (size % frame_bytes != 0) {
        throw ParseError("data chunk is not a whole number of sample frames", r.offset() + size - size % frame_bytes);
      }
      const std::size_t frames = size / frame_bytes;
      const char* p = r.data();
      std::vector<double> samples(frames, 0.0);
      for (std::size_t i = 0; i < frames; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
          const char* s = p + (i * channels + c) * (bits / 8);
          if (format == kFormatFloat) {
            std::uint32_t raw;
            std::memcpy(&raw, s, 4);
            if constexpr (std::endian::native == std::endian::big) raw = __builtin_bswap32(raw);
            acc += static_cast<double>(std::bit_cast<float>(raw));
          } else if (bits == 16) {
            const auto v = static_cast<std::int16_t>(static_cast<unsigned char>(s[0]) |
                                                     (static_cast<unsigned char>(s[1]) << 8));
            acc += static_cast<double>(v) / 32768.0;
          } else {
            std::uint32_t raw = 0;
            for (int b = 0; b < 4; ++b) raw |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[b])) << (8 * b);
            acc += static_cast<double>(static_cast<std::int32_t>(raw)) / 2147483648.0;
          }
        }
        samples[i] = acc / static_cast<double>(channels);
      }
      return AudioBuffer(std::move(samples), static_cast<double>(rate));
    } else {
      r.skip(size + (size & 1));
    }
  }
  throw ParseError("no data chunk", bytes.size());
}

void save_wav(const std::filesystem::path& path, const AudioBuffer& buf, WavEncoding encoding) {
  const std::uint16_t bits = encoding == WavEncoding::kPcm16 ? 16 : 32;
  const std::uint16_t format = encoding == WavEncoding::kFloat32 ? kFormatFloat : kFormatPcm;
  const std::uint32_t rate = static_cast<std::uint32_t>(std::lround(buf.sample_rate()));
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(buf.size() * (bits / 8));

  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, format);
  put_u16(out, 1);
  put_u32(out, rate);
  put_u32(out, rate * (bits / 8));
  put_u16(out, bits / 8);
  put_u16(out, bits);
  out += "data";
  put_u32(out, data_bytes);

  for (double v : buf.samples()) {
    switch (encoding) {
      case WavEncoding::kFloat32:
        put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
        break;
      case WavEncoding::kPcm16: {
        const double q = std::clamp(std::round(v * 32768.0), -32768.0, 32767.0);
        put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
        break;
      }
      case WavEncoding::kPcm32: {
        const double q = std::clamp(std::round(v * 2147483648.0), -2147483648.0, 2147483647.0);
        put_u32(out, static_cast<std::uint32_t>(static_cast<std::int32_t>(q)));
        break;
      }
    }
  }
  write_file_atomic(path, out);
}

}  // namespace keytap
