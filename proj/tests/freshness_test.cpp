// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "lurkt/crypto.hpp"
#include "lurkt/freshness.hpp"

namespace lurkt {
namespace {

// SHA-256("lurk-t/v1/freshness" || 0^32), frozen from Python hashlib.
constexpr const char* kPhiOfZero = "f72f3a23e78006accda7244a8224a3f5b4c24079eba6e0867f629075266319e0";

TEST(Phi, ZeroNonceMatchesReferenceHash) {
  auto r = freshness::phi(Bytes(32, 0));
  ASSERT_TRUE(r);
  EXPECT_EQ(to_hex(*r), kPhiOfZero);
}

TEST(Phi, DeterministicAndFixedLength) {
  for (int i = 0; i < 100; ++i) {
    const Bytes n = crypto::random_bytes(32);
    auto a = freshness::phi(n);
    auto b = freshness::phi(n);
    ASSERT_TRUE(a && b);
    EXPECT_EQ(*a, *b);
    EXPECT_EQ(a->size(), 32u);
  }
}

TEST(Phi, WrongNonceLengthIsBadLength) {
  for (std::size_t len : {0, 31, 33}) {
    auto r = freshness::phi(Bytes(len, 1));
    ASSERT_FALSE(r);
    EXPECT_EQ(r.error().code, Errc::BadLength);
  }
}

TEST(Verify, AcceptsImageRejectsFlippedBit) {
  const Bytes n = crypto::random_bytes(32);
  auto s = *freshness::phi(n);
  EXPECT_TRUE(*freshness::verify(n, s));
  s[17] ^= 0x04;
  EXPECT_FALSE(*freshness::verify(n, s));
}

TEST(VerifyProperty, RandomPairsNeverAccept) {
  int accepts = 0;
  for (int i = 0; i < 1000; ++i) {
    auto r = freshness::verify(crypto::random_bytes(32), crypto::random_bytes(32));
    ASSERT_TRUE(r);
    accepts += *r;
  }
  EXPECT_EQ(accepts, 0);
}

TEST(EngineNonce, GeneratedThenErased) {
  freshness::EngineNonce n;
  EXPECT_TRUE(n.is_zero());
  freshness::EngineNonce::generate_into(n);
  EXPECT_FALSE(n.is_zero());
  EXPECT_EQ(n.server_random(), *freshness::phi(n.view()));
  n.erase();
  EXPECT_TRUE(n.is_zero());
  EXPECT_EQ(n.view().size(), 32u);
}

}  // namespace
}  // namespace lurkt
