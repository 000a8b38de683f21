#pragma once

#include "coapsd/core/address.hpp"
#include "coapsd/core/bytes.hpp"

namespace coapsd {

// A UDP datagram: addressing envelope plus the raw CoAP frame.
struct Datagram {
    Endpoint src;
    Endpoint dst;
    Bytes payload;

    auto operator==(const Datagram&) const -> bool = default;
};

} // namespace coapsd
