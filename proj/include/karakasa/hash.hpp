#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace karakasa {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// 32-byte digest. Equality and ordering are byte-wise, so it can key ordered maps.
struct Hash256 {
    std::array<std::uint8_t, 32> bytes{};

    friend auto operator<=>(const Hash256&, const Hash256&) = default;

    bool is_zero() const;
    std::string hex() const;
    static Hash256 from_hex(std::string_view s);
};

Hash256 sha256(std::span<const std::uint8_t> data);
Hash256 sha256(std::string_view data);

} // namespace karakasa
