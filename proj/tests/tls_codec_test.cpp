// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <random>

#include "lurkt/key_schedule.hpp"
#include "lurkt/tls_codec.hpp"
#include "oracle.hpp"
#include "rfc8448_vectors.hpp"

namespace lurkt {
namespace {

using tls::HandshakeMessage;
using tls::HandshakeType;

Bytes trace_server_flight() {
  Bytes b = hex(rfc8448::rtt1::encrypted_extensions_plaintext);
  b.pop_back();  // inner content type
  return b;
}

TEST(Rfc8448Codec, ClientHelloReencodesByteIdentical) {
  const Bytes ch = hex(rfc8448::messages::client_hello_plaintext);
  auto m = tls::decode_message(ch);
  ASSERT_TRUE(m) << m.error().message();
  ASSERT_EQ(m->type(), HandshakeType::ClientHello);
  auto again = tls::encode_message(*m);
  ASSERT_TRUE(again);
  EXPECT_EQ(*again, ch);
  const auto* hello = m->as<tls::ClientHello>();
  auto shares = tls::parse_client_key_shares(tls::find_extension(hello->extensions, tls::ext::kKeyShare)->data);
  ASSERT_TRUE(shares);
  EXPECT_EQ(to_hex(shares->front().key_exchange), rfc8448::messages::client_key_public);
}

TEST(Rfc8448Codec, ServerHelloFields) {
  auto m = tls::decode_message(hex(rfc8448::messages::server_hello_payload));
  ASSERT_TRUE(m);
  const auto* sh = m->as<tls::ServerHello>();
  ASSERT_NE(sh, nullptr);
  EXPECT_EQ(to_hex(sh->random), "a6af06a4121860dc5e6e60249cd34c95930c8ac5cb1434dac155772ed3e26928");
  EXPECT_EQ(sh->cipher_suite, ks::kAes128GcmSha256);
  auto share = tls::parse_server_key_share(tls::find_extension(sh->extensions, tls::ext::kKeyShare)->data);
  ASSERT_TRUE(share);
  EXPECT_EQ(share->group, 0x001d);
  EXPECT_EQ(to_hex(share->key_exchange), "c9828876112095fe66762bdbf7c672e156d6cc253b833df1dd69b1b04e751f0f");
}

TEST(Rfc8448Codec, ServerFlightSplitsAndReencodes) {
  const Bytes flight = trace_server_flight();
  auto parts = tls::split_messages(flight);
  ASSERT_TRUE(parts);
  ASSERT_EQ(parts->size(), 4u);
  const HandshakeType expected[] = {HandshakeType::EncryptedExtensions, HandshakeType::Certificate,
                                    HandshakeType::CertificateVerify, HandshakeType::Finished};
  for (std::size_t i = 0; i < 4; ++i) {
    auto m = tls::decode_message((*parts)[i]);
    ASSERT_TRUE(m) << i << ": " << m.error().message();
    EXPECT_EQ(m->type(), expected[i]);
    EXPECT_EQ(*tls::encode_message(*m), Bytes((*parts)[i].begin(), (*parts)[i].end()));
  }
  auto fin = tls::decode_message(parts->back());
  EXPECT_EQ(to_hex(fin->as<tls::Finished>()->verify_data), rfc8448::rtt1::expected_server_mac);
}

TEST(Rfc8448Transcript, PrefixHashesMatchTrace) {
  Bytes all = hex(rfc8448::messages::client_hello_plaintext);
  append(all, hex(rfc8448::messages::server_hello_payload));
  append(all, trace_server_flight());
  auto t = tls::HandshakeTranscript::parse(all);
  ASSERT_TRUE(t) << t.error().message();
  EXPECT_EQ(t->size(), 6u);
  const auto alg = crypto::HashAlg::Sha256;
  EXPECT_EQ(to_hex(*t->prefix_hash(alg, HandshakeType::ServerHello)), rfc8448::rtt1::th_server_hello);
  EXPECT_EQ(to_hex(*t->prefix_hash(alg, HandshakeType::CertificateVerify)), rfc8448::rtt1::th_pre_server_finished);
  EXPECT_EQ(to_hex(*t->prefix_hash(alg, HandshakeType::Finished)), rfc8448::rtt1::th_server_finished);
  EXPECT_EQ(*t->prefix_hash(alg, HandshakeType::Finished), oracle::hash(alg, all));
}

TEST(Transcript, SingleClientHelloPrefix) {
  const Bytes ch = hex(rfc8448::messages::client_hello_plaintext);
  tls::HandshakeTranscript t;
  ASSERT_TRUE(t.append(ch));
  EXPECT_EQ(*t.prefix_bytes(HandshakeType::ClientHello), ch);
}

TEST(Transcript, AbsentMessageIsMissing) {
  tls::HandshakeTranscript t;
  ASSERT_TRUE(t.append(hex(rfc8448::messages::client_hello_plaintext)));
  ASSERT_TRUE(t.append(hex(rfc8448::messages::server_hello_payload)));
  auto r = t.prefix_bytes(HandshakeType::Finished);
  ASSERT_FALSE(r);
  EXPECT_EQ(r.error().code, Errc::MissingMessage);
}

TEST(Codec, EmptyInputIsTruncated) {
  auto r = tls::decode_message({});
  ASSERT_FALSE(r);
  EXPECT_EQ(r.error().code, Errc::Truncated);
}

TEST(Codec, EmptyFinishedEncodesZeroLength) {
  HandshakeMessage m{tls::Finished{}};
  auto e = tls::encode_message(m);
  ASSERT_TRUE(e);
  EXPECT_EQ(*e, (Bytes{20, 0, 0, 0}));
  auto d = tls::decode_message(*e);
  ASSERT_TRUE(d);
  EXPECT_EQ(*d, m);
}

TEST(Codec, TrailingBytesRejected) {
  Bytes b = hex(rfc8448::messages::server_hello_payload);
  b.push_back(0);
  EXPECT_FALSE(tls::decode_message(b));
}

// Random valid messages of every type survive encode/decode.
class RandomMessages {
 public:
  explicit RandomMessages(std::uint64_t seed) : rng_(seed) {}

  Bytes blob(std::size_t max) {
    Bytes b(std::uniform_int_distribution<std::size_t>(0, max)(rng_));
    for (auto& x : b) x = static_cast<std::uint8_t>(rng_());
    return b;
  }
  std::uint16_t u16() { return static_cast<std::uint16_t>(rng_()); }
  tls::Random random() {
    tls::Random r;
    for (auto& x : r) x = static_cast<std::uint8_t>(rng_());
    return r;
  }
  tls::Extensions extensions() {
    tls::Extensions e;
    const auto n = rng_() % 5;
    for (std::size_t i = 0; i < n; ++i) e.push_back({static_cast<std::uint16_t>(1000 + i), blob(40)});
    return e;
  }

  HandshakeMessage next() {
    switch (rng_() % 7) {
      case 0: {
        tls::ClientHello m;
        m.random = random();
        m.legacy_session_id = blob(32);
        m.cipher_suites = {u16(), u16()};
        m.extensions = extensions();
        return {m};
      }
      case 1: {
        tls::ServerHello m;
        m.random = random();
        m.legacy_session_id_echo = blob(32);
        m.cipher_suite = u16();
        m.extensions = extensions();
        return {m};
      }
      case 2: return {tls::EncryptedExtensions{extensions()}};
      case 3: {
        tls::Certificate m;
        m.request_context = blob(8);
        for (int i = 0; i < 3; ++i) {
          Bytes cert = blob(300);
          cert.push_back(0x30);  // cert_data is never empty
          m.entries.push_back({std::move(cert), {}});
        }
        return {m};
      }
      case 4: return {tls::CertificateVerify{u16(), blob(114)}};
      case 5: return {tls::Finished{blob(48)}};
      default: {
        tls::NewSessionTicket m;
        m.lifetime = static_cast<std::uint32_t>(rng_());
        m.age_add = static_cast<std::uint32_t>(rng_());
        m.nonce = blob(8);
        m.ticket = blob(64);
        if (m.ticket.empty()) m.ticket.push_back(1);
        m.extensions = extensions();
        return {m};
      }
    }
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

TEST(CodecProperty, RoundTripRandomValidMessages) {
  RandomMessages gen(7);
  for (int i = 0; i < 2000; ++i) {
    const auto m = gen.next();
    auto e = tls::encode_message(m);
    ASSERT_TRUE(e) << e.error().message();
    auto d = tls::decode_message(*e);
    ASSERT_TRUE(d) << tls::handshake_type_name(m.type()) << ": " << d.error().message();
    EXPECT_EQ(*d, m);
  }
}

// 10^5 inputs: half uniform noise, half single mutations of valid encodings.
// Each must decode or return a structured error.
TEST(CodecFuzz, DecodeMessageIsTotal) {
  RandomMessages gen(20240601);
  auto& rng = gen.rng();
  std::size_t decoded = 0, rejected = 0;
  for (int i = 0; i < 100000; ++i) {
    Bytes input;
    if (i % 2 == 0) {
      input = gen.blob(64);
      if (!input.empty() && rng() % 2) input[0] = static_cast<std::uint8_t>(1 + rng() % 20);
    } else {
      input = tls::encode_message(gen.next()).value();
      switch (rng() % 3) {
        case 0: input[rng() % input.size()] ^= static_cast<std::uint8_t>(1u << (rng() % 8)); break;
        case 1: input.resize(rng() % input.size()); break;
        default: input.insert(input.begin() + static_cast<long>(rng() % input.size()), static_cast<std::uint8_t>(rng()));
      }
    }
    auto r = tls::decode_message(input);
    if (r) {
      ++decoded;
    } else {
      ++rejected;
      EXPECT_FALSE(r.error().message().empty());
    }
  }
  EXPECT_EQ(decoded + rejected, 100000u);
  EXPECT_GT(rejected, 0u);
}

}  // namespace
}  // namespace lurkt
