#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <stdexcept>

namespace asmwb {

using Millis = std::int64_t;

/// Non-negative span of time in milliseconds.
struct Duration {
    Millis ms = 0;
    auto operator<=>(const Duration&) const = default;
};

/// Point on the monitored clock, in milliseconds since machine start.
struct Instant {
    Millis ms = 0;
    auto operator<=>(const Instant&) const = default;
};

inline Duration operator-(Instant a, Instant b) { return Duration{a.ms - b.ms}; }

using DomainId = std::int32_t;

enum class ValueKind : std::uint8_t { Boolean, Enum, Integer, Duration, Instant };

/// A location value. Enum literals are stored as (domain, literal index);
/// their names live in the owning MachineDefinition.
class Value {
public:
    Value() = default;

    static Value boolean(bool b) { return Value(ValueKind::Boolean, -1, b ? 1 : 0); }
    static Value literal(DomainId domain, int index) { return Value(ValueKind::Enum, domain, index); }
    static Value integer(std::int64_t v) { return Value(ValueKind::Integer, -1, v); }
    static Value duration(Duration d)
    {
        if (d.ms < 0) throw std::invalid_argument("negative duration");
        return Value(ValueKind::Duration, -1, d.ms);
    }
    static Value instant(Instant t)
    {
        if (t.ms < 0) throw std::invalid_argument("negative instant");
        return Value(ValueKind::Instant, -1, t.ms);
    }

    [[nodiscard]] ValueKind kind() const { return kind_; }
    [[nodiscard]] bool is_boolean() const { return kind_ == ValueKind::Boolean; }
    [[nodiscard]] bool is_enum() const { return kind_ == ValueKind::Enum; }

    [[nodiscard]] bool as_bool() const { return payload_ != 0; }
    [[nodiscard]] DomainId domain() const { return domain_; }
    [[nodiscard]] int literal_index() const { return static_cast<int>(payload_); }
    [[nodiscard]] std::int64_t as_integer() const { return payload_; }
    [[nodiscard]] Duration as_duration() const { return Duration{payload_}; }
    [[nodiscard]] Instant as_instant() const { return Instant{payload_}; }
    [[nodiscard]] std::int64_t raw() const { return payload_; }

    bool operator==(const Value&) const = default;
    auto operator<=>(const Value&) const = default;

private:
    Value(ValueKind k, DomainId d, std::int64_t p) : kind_(k), domain_(d), payload_(p) {}

    ValueKind kind_ = ValueKind::Boolean;
    DomainId domain_ = -1;
    std::int64_t payload_ = 0;
};

struct ValueHash {
    std::size_t operator()(const Value& v) const noexcept
    {
        std::size_t h = std::hash<std::int64_t>{}(v.raw());
        h ^= (static_cast<std::size_t>(v.kind()) << 1) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        h ^= static_cast<std::size_t>(v.domain() + 7) * 0x100000001b3ULL;
        return h;
    }
};

} // namespace asmwb
