// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <random>

#include "lurkt/channel.hpp"
#include "lurkt/lurk.hpp"

namespace lurkt {
namespace {

using lurk::LurkMessage;
using lurk::MsgType;

Bytes blob(std::mt19937_64& rng, std::size_t max) {
  Bytes b(rng() % (max + 1));
  for (auto& x : b) x = static_cast<std::uint8_t>(rng());
  return b;
}

LurkMessage random_message(std::mt19937_64& rng) {
  static const std::uint8_t types[] = {1, 2, 3, 4, 5, 6, 7, 8, 0x81, 0x82, 0x83, 0x84, 0x85, 0x86, 0x87, 0x88, 0xFF};
  LurkMessage m;
  m.type = types[rng() % std::size(types)];
  m.session_id = lurk::SessionId::random();
  m.payload = blob(rng, 300);
  return m;
}

TEST(LurkFrame, RoundTripRandomMessages) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 5000; ++i) {
    const auto m = random_message(rng);
    auto e = lurk::encode_lurk(m);
    ASSERT_TRUE(e);
    EXPECT_EQ(e->size(), lurk::kHeaderLen + m.payload.size());
    auto d = lurk::decode_lurk(*e);
    ASSERT_TRUE(d) << d.error().message();
    EXPECT_EQ(*d, m);
  }
}

TEST(LurkFrame, VersionTwoIsBadVersion) {
  auto e = *lurk::encode_lurk(lurk::make_request(MsgType::GetEcdhe, lurk::SessionId{}, {}));
  e[0] = 2;
  auto d = lurk::decode_lurk(e);
  ASSERT_FALSE(d);
  EXPECT_EQ(d.error().code, Errc::BadVersion);
}

TEST(LurkFrame, ResponseAndErrorTypeBits) {
  const auto sid = lurk::SessionId::random();
  auto r = lurk::make_response(MsgType::GetSigAndApp, sid, {});
  EXPECT_EQ(r.type, 0x83);
  EXPECT_TRUE(r.is_response());
  auto e = lurk::make_error_message(sid, Error(Errc::FreshnessViolation, "n_s"));
  EXPECT_TRUE(e.is_error());
  EXPECT_EQ(lurk::decode_error_payload(e.payload).code, Errc::FreshnessViolation);
}

TEST(LurkPayloads, TypedRoundTrips) {
  lurk::HandshakeSecretsRequest hs;
  hs.row = 2;
  hs.suite = 0x1301;
  hs.n_e = SecretBytes(Bytes(32, 7));
  hs.transcript = Bytes(500, 3);
  hs.ke_shared = SecretBytes(Bytes(32, 9));
  auto d = lurk::HandshakeSecretsRequest::decode(*hs.encode());
  ASSERT_TRUE(d);
  EXPECT_EQ(d->row, 2);
  EXPECT_EQ(d->transcript, hs.transcript);
  EXPECT_EQ(d->n_e, hs.n_e);
  EXPECT_EQ(d->ke_shared, hs.ke_shared);

  lurk::Quote q{Bytes(32, 1), Bytes(32, 2), Bytes(64, 3)};
  auto dq = lurk::Quote::decode(q.encode());
  ASSERT_TRUE(dq);
  EXPECT_EQ(dq->signature, q.signature);
  EXPECT_EQ(q.signed_message().size(), 64u);
}

// 10^5 inputs: uniform noise, noise behind a valid header and single
// mutations of valid frames. Each must decode or return a structured error.
TEST(LurkFuzz, DecodeIsTotal) {
  std::mt19937_64 rng(424242);
  std::size_t decoded = 0, rejected = 0;
  for (int i = 0; i < 100000; ++i) {
    Bytes input;
    switch (i % 3) {
      case 0: input = blob(rng, 40); break;
      case 1: {
        input = *lurk::encode_lurk(random_message(rng));
        input.resize(lurk::kHeaderLen);
        append(input, blob(rng, 40));
        break;
      }
      default: {
        input = *lurk::encode_lurk(random_message(rng));
        input[rng() % input.size()] ^= static_cast<std::uint8_t>(1u << (rng() % 8));
        if (rng() % 2) input.resize(rng() % input.size());
      }
    }
    auto r = lurk::decode_lurk(input);
    if (r) {
      ++decoded;
    } else {
      ++rejected;
      EXPECT_FALSE(r.error().message().empty());
    }
    // Typed payload decoders must be total as well.
    const ByteView payload = input.size() > lurk::kHeaderLen ? ByteView(input).subspan(lurk::kHeaderLen) : ByteView();
    (void)lurk::SigAndAppRequest::decode(payload);
    (void)lurk::HandshakeSecretsRequest::decode(payload);
    (void)lurk::TicketRequest::decode(payload);
    (void)lurk::Quote::decode(payload);
  }
  EXPECT_EQ(decoded + rejected, 100000u);
  EXPECT_GT(decoded, 0u);
  EXPECT_GT(rejected, 0u);
}

class SecureChannelTest : public ::testing::Test {
 protected:
  Bytes key = Bytes(channel::kChannelKeyLen, 0x5c);
  channel::SecureChannel engine{key, channel::Role::Engine};
  channel::SecureChannel service{key, channel::Role::CryptoService};
};

TEST_F(SecureChannelTest, RoundTripBothDirections) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    const Bytes frame = *lurk::encode_lurk(random_message(rng));
    auto opened = service.open(*engine.seal(frame));
    ASSERT_TRUE(opened);
    EXPECT_EQ(*lurk::decode_lurk(*opened), *lurk::decode_lurk(frame));
    auto back = engine.open(*service.seal(frame));
    ASSERT_TRUE(back);
    EXPECT_EQ(*back, frame);
  }
}

TEST_F(SecureChannelTest, ReplayedFrameIsSequenceViolation) {
  const Bytes w = *engine.seal(Bytes(30, 1));
  ASSERT_TRUE(service.open(w));
  auto again = service.open(w);
  ASSERT_FALSE(again);
  EXPECT_EQ(again.error().code, Errc::SequenceViolation);
}

TEST_F(SecureChannelTest, FlippedBitIsChannelAuthFailure) {
  Bytes w = *engine.seal(Bytes(30, 1));
  w[channel::kSecureHeaderLen + 3] ^= 0x80;
  auto r = service.open(w);
  ASSERT_FALSE(r);
  EXPECT_EQ(r.error().code, Errc::ChannelAuthFailure);
}

TEST_F(SecureChannelTest, WrongKeyIsChannelAuthFailure) {
  channel::SecureChannel other(Bytes(channel::kChannelKeyLen, 0x11), channel::Role::CryptoService);
  auto r = other.open(*engine.seal(Bytes(10, 1)));
  ASSERT_FALSE(r);
  EXPECT_EQ(r.error().code, Errc::ChannelAuthFailure);
}

}  // namespace
}  // namespace lurkt
