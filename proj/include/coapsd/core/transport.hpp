#pragma once

#include "coapsd/core/datagram.hpp"

#include <string_view>

namespace coapsd {

// Which side of the gateway a frame arrives from or leaves toward.
enum class Side { External, Lln };

inline auto to_string(Side s) -> std::string_view {
    return s == Side::External ? "external" : "lln";
}

// Outbound path used by the gateway.
class Transport {
public:
    virtual ~Transport() = default;
    virtual void send(Datagram dg, Side egress) = 0;
};

// Inbound path into the gateway.
class FrameSink {
public:
    virtual ~FrameSink() = default;
    virtual void forward(const Datagram& dg, Side ingress) = 0;
};

} // namespace coapsd
