// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cassert>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace lurkt {

enum class Errc {
  // codecs
  Truncated,
  UnknownType,
  MalformedExtension,
  MalformedPayload,
  OversizeBody,
  BadVersion,
  MissingMessage,
  // key schedule / records
  LengthOverflow,
  EmptyTranscript,
  OutOfOrder,
  ReusedSchedule,
  PskOnlyUnsupported,
  SeqExhausted,
  AuthFailure,
  BadContentType,
  BadLength,
  // channel
  ChannelAuthFailure,
  SequenceViolation,
  // crypto service
  UnsupportedGroup,
  UnsupportedScheme,
  ConfigViolation,
  FreshnessViolation,
  UnknownSession,
  MissingKeyShare,
  TranscriptMismatch,
  BadClientFinished,
  StoreFull,
  UnknownPskId,
  CacheExpired,
  // engine / client
  InvalidConfig,
  NegotiationFailure,
  CsUnavailable,
  CsRejected,
  BadBinder,
  StateViolation,
  BadServerSignature,
  BadServerFinished,
  BadCertificate,
  ServerRejectedPsk,
  // bench / plumbing
  TargetUnavailable,
  SuiteMismatch,
  Io,
  CryptoFailure,
};

std::string_view errc_name(Errc code);

struct Error {
  Errc code;
  std::string detail;
  std::optional<std::size_t> offset;

  Error(Errc c, std::string d = {}, std::optional<std::size_t> off = std::nullopt)
      : code(c), detail(std::move(d)), offset(off) {}

  std::string message() const;
};

// Minimal expected-style carrier: either a value or an Error.
template <class T>
class [[nodiscard]] Result {
 public:
  Result(T value) : v_(std::move(value)) {}  // NOLINT(google-explicit-constructor)
  Result(Error err) : v_(std::move(err)) {}  // NOLINT(google-explicit-constructor)

  bool ok() const { return v_.index() == 0; }
  explicit operator bool() const { return ok(); }

  T& value() & {
    assert(ok());
    return std::get<0>(v_);
  }
  const T& value() const& {
    assert(ok());
    return std::get<0>(v_);
  }
  T&& value() && {
    assert(ok());
    return std::get<0>(std::move(v_));
  }
  T& operator*() & { return value(); }
  const T& operator*() const& { return value(); }
  T* operator->() { return &value(); }
  const T* operator->() const { return &value(); }

  const Error& error() const {
    assert(!ok());
    return std::get<1>(v_);
  }
  Errc code() const { return error().code; }

 private:
  std::variant<T, Error> v_;
};

template <>
class [[nodiscard]] Result<void> {
 public:
  Result() = default;
  Result(Error err) : err_(std::move(err)) {}  // NOLINT(google-explicit-constructor)

  bool ok() const { return !err_.has_value(); }
  explicit operator bool() const { return ok(); }
  const Error& error() const {
    assert(!ok());
    return *err_;
  }
  Errc code() const { return error().code; }

 private:
  std::optional<Error> err_;
};

using Status = Result<void>;

inline Error make_error(Errc code, std::string detail = {},
                        std::optional<std::size_t> offset = std::nullopt) {
  return Error(code, std::move(detail), offset);
}

}  // namespace lurkt

// Propagates the error of a Result-returning expression.
#define LURKT_TRY(expr)                                  \
  do {                                                   \
    auto&& lurkt_try_res_ = (expr);                      \
    if (!lurkt_try_res_.ok()) return lurkt_try_res_.error(); \
  } while (0)

#define LURKT_CONCAT_INNER(a, b) a##b
#define LURKT_CONCAT(a, b) LURKT_CONCAT_INNER(a, b)

// Binds the value of a Result-returning expression or propagates its error.
#define LURKT_ASSIGN(lhs, expr) LURKT_ASSIGN_IMPL(LURKT_CONCAT(lurkt_res_, __LINE__), lhs, expr)
#define LURKT_ASSIGN_IMPL(tmp, lhs, expr) \
  auto tmp = (expr);                      \
  if (!tmp.ok()) return tmp.error();      \
  lhs = std::move(tmp).value()
