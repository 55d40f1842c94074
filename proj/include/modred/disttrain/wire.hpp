/*
 * Copyright 2026 The modred Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/**
 * @file wire.hpp
 * @brief Coordinator/worker frame codec.
 *
 * Frame: "MRDX" | type u8 | payload length u64 | payload. Integers and
 * reals are little-endian.
 *
 *     0x01 HELLO     channel u8
 *     0x02 EPOCH     epoch u32, epoch_seed u64, w_align f64, w_rec f64
 *     0x03 EMB       step u64, rows u32, dim u32, rows*dim f64
 *     0x04 GRAD      same layout as EMB
 *     0x05 DONE      step u64
 *     0x06 SHUTDOWN  (empty)
 *     0x07 ERR       UTF-8 reason
 */
#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "modred/bytes.hpp"
#include "modred/errors.hpp"

namespace modred::dist {

inline constexpr char kFrameMagic[4] = {'M', 'R', 'D', 'X'};
inline constexpr std::size_t kFrameHeaderSize = 13;
// Refuse payloads above 1 GiB so a corrupt length cannot trigger a huge allocation.
inline constexpr std::uint64_t kMaxPayload = 1ull << 30;

enum class MsgType : std::uint8_t {
  kHello = 0x01,
  kEpoch = 0x02,
  kEmb = 0x03,
  kGrad = 0x04,
  kDone = 0x05,
  kShutdown = 0x06,
  kErr = 0x07,
};

struct Hello {
  std::uint8_t channel = 0;
  bool operator==(const Hello&) const = default;
};

struct EpochBegin {
  std::uint32_t epoch = 0;
  std::uint64_t epoch_seed = 0;
  double w_align = 0.0;
  double w_rec = 1.0;
  bool operator==(const EpochBegin&) const = default;
};

// Row-major (rows, dim) block for one step.
struct MatrixMsg {
  std::uint64_t step = 0;
  std::uint32_t rows = 0;
  std::uint32_t dim = 0;
  std::vector<double> data;
  bool operator==(const MatrixMsg&) const = default;
};

struct Emb : MatrixMsg {};
struct Grad : MatrixMsg {};

struct Done {
  std::uint64_t step = 0;
  bool operator==(const Done&) const = default;
};

struct Shutdown {
  bool operator==(const Shutdown&) const = default;
};

struct Err {
  std::string reason;
  bool operator==(const Err&) const = default;
};

using Message = std::variant<Hello, EpochBegin, Emb, Grad, Done, Shutdown, Err>;

inline const char* message_name(const Message& m) {
  static constexpr const char* kNames[] = {"HELLO", "EPOCH", "EMB", "GRAD", "DONE", "SHUTDOWN", "ERR"};
  return kNames[m.index()];
}

inline MsgType message_type(const Message& m) { return static_cast<MsgType>(m.index() + 1); }

struct FrameHeader {
  MsgType type;
  std::uint64_t payload_len;
};

namespace detail {

inline void put_matrix(ByteWriter& w, const MatrixMsg& m) {
  if (m.data.size() != static_cast<std::size_t>(m.rows) * m.dim) {
    throw ProtocolError("matrix message holds " + std::to_string(m.data.size()) + " values for " +
                        std::to_string(m.rows) + "x" + std::to_string(m.dim));
  }
  w.u64(m.step);
  w.u32(m.rows);
  w.u32(m.dim);
  w.f64s(m.data);
}

inline void get_matrix(ByteReader<ProtocolError>& r, MatrixMsg& m) {
  m.step = r.u64();
  m.rows = r.u32();
  m.dim = r.u32();
  const std::uint64_t n = static_cast<std::uint64_t>(m.rows) * m.dim;
  if (n * 8 != r.remaining()) throw ProtocolError("matrix payload size does not match its rows x dim header");
  m.data = r.f64s(static_cast<std::size_t>(n));
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_payload(const Message& msg) {
  ByteWriter w;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Hello>) {
          w.u8(m.channel);
        } else if constexpr (std::is_same_v<T, EpochBegin>) {
          w.u32(m.epoch);
          w.u64(m.epoch_seed);
          w.f64(m.w_align);
          w.f64(m.w_rec);
        } else if constexpr (std::is_same_v<T, Emb> || std::is_same_v<T, Grad>) {
          detail::put_matrix(w, m);
        } else if constexpr (std::is_same_v<T, Done>) {
          w.u64(m.step);
        } else if constexpr (std::is_same_v<T, Err>) {
          w.bytes(m.reason);
        }
      },
      msg);
  return w.take();
}

inline std::vector<std::uint8_t> encode_frame(const Message& msg) {
  const auto payload = encode_payload(msg);
  ByteWriter w;
  w.bytes(std::string_view(kFrameMagic, 4));
  w.u8(static_cast<std::uint8_t>(message_type(msg)));
  w.u64(payload.size());
  auto out = w.take();
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

inline FrameHeader decode_header(std::span<const std::uint8_t> h) {
  if (h.size() != kFrameHeaderSize) throw ProtocolError("frame header must be 13 bytes");
  if (std::memcmp(h.data(), kFrameMagic, 4) != 0) throw ProtocolError("bad frame magic");
  ByteReader<ProtocolError> r(h.subspan(4));
  const std::uint8_t type = r.u8();
  if (type < 0x01 || type > 0x07) throw ProtocolError("unknown message type 0x" + std::to_string(type));
  const std::uint64_t len = r.u64();
  if (len > kMaxPayload) throw ProtocolError("frame payload of " + std::to_string(len) + " bytes exceeds limit");
  return {static_cast<MsgType>(type), len};
}

inline Message decode_payload(MsgType type, std::span<const std::uint8_t> payload) {
  ByteReader<ProtocolError> r(payload);
  Message out;
  switch (type) {
    case MsgType::kHello: out = Hello{r.u8()}; break;
    case MsgType::kEpoch: {
      EpochBegin e;
      e.epoch = r.u32();
      e.epoch_seed = r.u64();
      e.w_align = r.f64();
      e.w_rec = r.f64();
      out = e;
      break;
    }
    case MsgType::kEmb: {
      Emb e;
      detail::get_matrix(r, e);
      out = std::move(e);
      break;
    }
    case MsgType::kGrad: {
      Grad g;
      detail::get_matrix(r, g);
      out = std::move(g);
      break;
    }
    case MsgType::kDone: out = Done{r.u64()}; break;
    case MsgType::kShutdown: out = Shutdown{}; break;
    case MsgType::kErr: out = Err{r.str(r.remaining())}; break;
    default: throw ProtocolError("unknown message type");
  }
  if (!r.done()) throw ProtocolError("trailing bytes in payload");
  return out;
}

// Whole-frame decode for a buffer holding exactly one frame.
inline Message decode_frame(std::span<const std::uint8_t> frame) {
  if (frame.size() < kFrameHeaderSize) throw ProtocolError("truncated frame header");
  const auto h = decode_header(frame.subspan(0, kFrameHeaderSize));
  if (frame.size() - kFrameHeaderSize != h.payload_len) throw ProtocolError("frame length does not match header");
  return decode_payload(h.type, frame.subspan(kFrameHeaderSize));
}

}  // namespace modred::dist
