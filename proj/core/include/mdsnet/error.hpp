#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace mdsnet {

// All library failures surface as mdsnet::Error with a message that names
// the offending quantity (dimension, layer, file, ...).
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline void msg_append(std::ostringstream&) {}

template <typename T, typename... Rest>
void msg_append(std::ostringstream& os, const T& v, const Rest&... rest) {
    os << v;
    msg_append(os, rest...);
}

}  // namespace detail

template <typename... Parts>
[[noreturn]] void fail(const Parts&... parts) {
    std::ostringstream os;
    detail::msg_append(os, parts...);
    throw Error(os.str());
}

template <typename... Parts>
void require(bool condition, const Parts&... parts) {
    if (!condition) fail(parts...);
}

}  // namespace mdsnet
