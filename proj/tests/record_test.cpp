// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "lurkt/record.hpp"
#include "oracle.hpp"
#include "rfc8448_vectors.hpp"

namespace lurkt {
namespace {

using record::ContentType;

const ks::CipherSuite& aes128() { return *ks::find_suite(ks::kAes128GcmSha256); }

record::TrafficKeys keys(const char* secret_hex) { return record::derive_traffic_keys(aes128(), hex(secret_hex)); }

struct TraceRecord {
  const char* secret;
  std::uint64_t seq;
  const char* header;
  const char* ciphertext;
  const char* plaintext;  // inner plaintext: content, then the type byte
};

// Every protected record of both traces with the secret that protects it.
std::vector<TraceRecord> trace_records() {
  using namespace rfc8448;
  return {
      {rtt1::server_handshake_traffic_secret, 0, rtt1::encrypted_extensions_header,
       rtt1::encrypted_extensions_ciphertext, rtt1::encrypted_extensions_plaintext},
      {rtt1::client_handshake_traffic_secret, 0, rtt1::encrypted_client_finished_message_header,
       rtt1::encrypted_client_finished_message_ciphertext, rtt1::encrypted_client_finished_message_plaintext},
      {rtt1::server_traffic_secret, 0, rtt1::encrypted_new_session_ticket_header,
       rtt1::encrypted_new_session_ticket_ciphertext, rtt1::encrypted_new_session_ticket_plaintext},
      {rtt1::client_traffic_secret, 0, rtt1::encrypted_application_data_client_header,
       rtt1::encrypted_application_data_client_ciphertext, rtt1::encrypted_application_data_client_plaintext},
      {rtt1::server_traffic_secret, 1, rtt1::encrypted_application_data_server_header,
       rtt1::encrypted_application_data_server_ciphertext, rtt1::encrypted_application_data_server_plaintext},
      {rtt0::server_handshake_traffic_secret, 0, rtt0::encrypted_extensions_header,
       rtt0::encrypted_extensions_ciphertext, rtt0::encrypted_extensions_plaintext},
      {rtt0::client_handshake_traffic_secret, 0, rtt0::encrypted_client_finished_message_header,
       rtt0::encrypted_client_finished_message_ciphertext, rtt0::encrypted_client_finished_message_plaintext},
      {rtt0::client_traffic_secret, 0, rtt0::encrypted_application_data_client_header,
       rtt0::encrypted_application_data_client_ciphertext, rtt0::encrypted_application_data_client_plaintext},
      {rtt0::server_traffic_secret, 0, rtt0::encrypted_application_data_server_header,
       rtt0::encrypted_application_data_server_ciphertext, rtt0::encrypted_application_data_server_plaintext},
  };
}

Bytes wire(const TraceRecord& r) {
  Bytes b = hex(r.header);
  append(b, hex(r.ciphertext));
  return b;
}

TEST(TrafficKeys, MatchOracleExpansion) {
  const Bytes secret = hex(rfc8448::rtt1::server_handshake_traffic_secret);
  auto tk = record::derive_traffic_keys(aes128(), secret);
  EXPECT_EQ(tk.key.expose(), oracle::expand_label(crypto::HashAlg::Sha256, secret, "key", {}, 16));
  EXPECT_EQ(tk.iv.expose(), oracle::expand_label(crypto::HashAlg::Sha256, secret, "iv", {}, 12));
  EXPECT_EQ(tk.seq, 0u);
}

TEST(TrafficKeys, DeterministicAndDistinctPerSecret) {
  auto a = keys(rfc8448::rtt1::server_handshake_traffic_secret);
  auto b = keys(rfc8448::rtt1::server_handshake_traffic_secret);
  auto c = keys(rfc8448::rtt1::client_handshake_traffic_secret);
  EXPECT_EQ(a.key, b.key);
  EXPECT_EQ(a.iv, b.iv);
  EXPECT_EQ(b.seq, 0u);
  EXPECT_NE(a.key.expose(), c.key.expose());
  EXPECT_NE(a.iv.expose(), c.iv.expose());
}

TEST(Rfc8448Records, SealReproducesTraceBytes) {
  for (const auto& r : trace_records()) {
    auto tk = keys(r.secret);
    tk.seq = r.seq;
    Bytes inner = hex(r.plaintext);
    const auto type = static_cast<ContentType>(inner.back());
    inner.pop_back();
    auto sealed = record::seal(tk, inner, type);
    ASSERT_TRUE(sealed) << sealed.error().message();
    EXPECT_EQ(to_hex(*sealed), to_hex(wire(r))) << r.header;
  }
}

TEST(Rfc8448Records, OpenRecoversTracePlaintext) {
  for (const auto& r : trace_records()) {
    auto tk = keys(r.secret);
    tk.seq = r.seq;
    auto opened = record::open(tk, wire(r));
    ASSERT_TRUE(opened) << opened.error().message();
    Bytes inner = opened->plaintext;
    inner.push_back(static_cast<std::uint8_t>(opened->type));
    EXPECT_EQ(to_hex(inner), r.plaintext);
    EXPECT_EQ(tk.seq, r.seq + 1);
  }
}

TEST(Record, RoundTripAndCounterAdvance) {
  auto tx = keys(rfc8448::rtt1::server_traffic_secret);
  auto rx = keys(rfc8448::rtt1::server_traffic_secret);
  const ByteView text = as_bytes("application bytes");
  const Bytes msg(text.begin(), text.end());
  auto r0 = record::seal(tx, msg, ContentType::ApplicationData);
  auto r1 = record::seal(tx, msg, ContentType::ApplicationData);
  ASSERT_TRUE(r0 && r1);
  EXPECT_EQ(tx.seq, 2u);
  EXPECT_NE(*r0, *r1);
  auto o0 = record::open(rx, *r0);
  auto o1 = record::open(rx, *r1);
  ASSERT_TRUE(o0 && o1);
  EXPECT_EQ(o0->plaintext, msg);
  EXPECT_EQ(o1->type, ContentType::ApplicationData);
}

TEST(Record, BitFlipIsAuthFailure) {
  auto tx = keys(rfc8448::rtt1::server_traffic_secret);
  auto rx = keys(rfc8448::rtt1::server_traffic_secret);
  auto r = record::seal(tx, Bytes(50, 0x42), ContentType::ApplicationData);
  ASSERT_TRUE(r);
  Bytes bad = *r;
  bad[record::kHeaderLen + 7] ^= 0x01;
  auto o = record::open(rx, bad);
  ASSERT_FALSE(o);
  EXPECT_EQ(o.error().code, Errc::AuthFailure);
  EXPECT_EQ(rx.seq, 0u);
}

TEST(Record, ReplayedRecordIsAuthFailure) {
  auto tx = keys(rfc8448::rtt1::server_traffic_secret);
  auto rx = keys(rfc8448::rtt1::server_traffic_secret);
  auto r = record::seal(tx, Bytes(20, 1), ContentType::ApplicationData);
  ASSERT_TRUE(r && record::open(rx, *r));
  auto again = record::open(rx, *r);
  ASSERT_FALSE(again);
  EXPECT_EQ(again.error().code, Errc::AuthFailure);
}

TEST(Record, FragmentsAbovePlaintextLimit) {
  auto tx = keys(rfc8448::rtt1::server_traffic_secret);
  auto rx = keys(rfc8448::rtt1::server_traffic_secret);
  const Bytes big(record::kMaxPlaintext * 2 + 10, 0x33);
  auto sealed = record::seal_fragmented(tx, big, ContentType::ApplicationData);
  ASSERT_TRUE(sealed);
  EXPECT_EQ(tx.seq, 3u);
  record::RecordReader reader;
  reader.feed(*sealed);
  Bytes out;
  while (true) {
    auto next = reader.next();
    ASSERT_TRUE(next);
    if (!*next) break;
    auto o = record::open(rx, (*next)->bytes);
    ASSERT_TRUE(o);
    append(out, o->plaintext);
  }
  EXPECT_EQ(out, big);
}

}  // namespace
}  // namespace lurkt
