#include "coapsd/coap/codec.hpp"

#include <algorithm>
#include <fmt/format.h>

namespace coapsd::coap {

namespace {

constexpr std::uint8_t version = 1;
constexpr std::uint8_t payload_marker = 0xFF;
constexpr std::size_t max_string_option = 255;
constexpr std::size_t max_option_length = 65535 + 269;

auto encode_uint(std::uint32_t v) -> Bytes {
    Bytes out;
    while (v) {
        out.insert(out.begin(), static_cast<std::uint8_t>(v & 0xFF));
        v >>= 8;
    }
    return out;
}

auto decode_uint(std::span<const std::uint8_t> b) -> std::uint32_t {
    std::uint32_t v = 0;
    for (auto x : b) v = (v << 8) | x;
    return v;
}

auto block_szx(std::uint16_t size) -> int {
    for (int szx = 0; szx <= 6; ++szx) {
        if ((16u << szx) == size) return szx;
    }
    return -1;
}

struct Entry {
    std::uint16_t number;
    Bytes value;
};

void fail(const std::string& what) {
    throw InvariantViolation(what);
}

auto collect_options(const Message& msg) -> std::vector<Entry> {
    const auto& o = msg.options;
    std::vector<Entry> out;

    if (o.observe) {
        if (*o.observe > max_observe_value) fail("observe value exceeds 3 bytes");
        out.push_back({option::observe, encode_uint(*o.observe)});
    }
    for (const auto& seg : o.uri_path) {
        if (seg.size() > max_string_option) fail("Uri-Path segment longer than 255 bytes");
        out.push_back({option::uri_path, to_bytes(seg)});
    }
    if (o.content_format) {
        out.push_back({option::content_format, encode_uint(*o.content_format)});
    }
    if (o.max_age) {
        out.push_back({option::max_age, encode_uint(*o.max_age)});
    }
    for (const auto& q : o.uri_query) {
        if (q.size() > max_string_option) fail("Uri-Query longer than 255 bytes");
        out.push_back({option::uri_query, to_bytes(q)});
    }
    if (o.block1) {
        const int szx = block_szx(o.block1->size);
        if (szx < 0) fail("block1 size must be a power of two in 16..1024");
        if (o.block1->num >= (1u << 20)) fail("block1 number exceeds 20 bits");
        const std::uint32_t v = (o.block1->num << 4) | (o.block1->more ? 0x8u : 0u) |
                                static_cast<std::uint32_t>(szx);
        out.push_back({option::block1, encode_uint(v)});
    }
    if (o.binding) {
        const auto& b = *o.binding;
        if (b.dest_resource.empty()) fail("binding dest_resource is empty");
        if (b.dest_resource.size() > max_string_option) fail("binding dest_resource too long");
        if (b.pmin > b.pmax) fail("binding pmin > pmax");
        out.push_back({option::bind_dest_addr, to_bytes(b.dest_addr.to_string())});
        out.push_back({option::bind_dest_resource, to_bytes(b.dest_resource)});
        out.push_back({option::bind_pmin, encode_uint(b.pmin)});
        out.push_back({option::bind_pmax, encode_uint(b.pmax)});
    }
    for (const auto& raw : o.other) {
        if (option::is_typed(raw.number)) {
            fail(fmt::format("raw option {} collides with a typed option", raw.number));
        }
        if (raw.value.size() > max_option_length) fail("option value too long");
        out.push_back({raw.number, raw.value});
    }
    // Typed entries were pushed before raw ones, so stability keeps repeated
    // options in their given order.
    std::stable_sort(out.begin(), out.end(),
                     [](const Entry& a, const Entry& b) { return a.number < b.number; });
    return out;
}

void put_nibble_ext(Bytes& out, std::uint32_t v) {
    if (v >= 269) {
        const std::uint32_t e = v - 269;
        out.push_back(static_cast<std::uint8_t>(e >> 8));
        out.push_back(static_cast<std::uint8_t>(e & 0xFF));
    } else if (v >= 13) {
        out.push_back(static_cast<std::uint8_t>(v - 13));
    }
}

auto nibble_of(std::uint32_t v) -> std::uint8_t {
    if (v >= 269) return 14;
    if (v >= 13) return 13;
    return static_cast<std::uint8_t>(v);
}

void check_header(const Message& msg) {
    if (msg.token.size() > max_token_length) fail("token longer than 8 bytes");
    if (msg.code == Code::Empty) {
        if (!msg.token.empty() || !msg.payload.empty() || !msg.options.empty()) {
            fail("EMPTY message must carry no token, options or payload");
        }
    }
}

} // namespace

auto to_string(DecodeErrc e) -> std::string_view {
    switch (e) {
    case DecodeErrc::None: return "none";
    case DecodeErrc::TooShort: return "frame shorter than header";
    case DecodeErrc::BadVersion: return "unsupported version";
    case DecodeErrc::BadTokenLength: return "token length > 8";
    case DecodeErrc::Truncated: return "truncated frame";
    case DecodeErrc::BadOption: return "invalid option";
    case DecodeErrc::BadEmptyMessage: return "EMPTY message with content";
    case DecodeErrc::EmptyPayload: return "payload marker without payload";
    }
    return "?";
}

void validate(const Message& msg) {
    check_header(msg);
    (void)collect_options(msg);
}

auto encode(const Message& msg) -> Bytes {
    check_header(msg);
    const auto entries = collect_options(msg);

    Bytes out;
    out.reserve(4 + msg.token.size() + msg.payload.size() + entries.size() * 4);
    out.push_back(static_cast<std::uint8_t>((version << 6) |
                                            (static_cast<std::uint8_t>(msg.type) << 4) |
                                            msg.token.size()));
    out.push_back(static_cast<std::uint8_t>(msg.code));
    out.push_back(static_cast<std::uint8_t>(msg.mid >> 8));
    out.push_back(static_cast<std::uint8_t>(msg.mid & 0xFF));
    out.insert(out.end(), msg.token.begin(), msg.token.end());

    std::uint32_t previous = 0;
    for (const auto& e : entries) {
        const std::uint32_t delta = e.number - previous;
        const auto len = static_cast<std::uint32_t>(e.value.size());
        out.push_back(static_cast<std::uint8_t>((nibble_of(delta) << 4) | nibble_of(len)));
        put_nibble_ext(out, delta);
        put_nibble_ext(out, len);
        out.insert(out.end(), e.value.begin(), e.value.end());
        previous = e.number;
    }

    if (!msg.payload.empty()) {
        out.push_back(payload_marker);
        out.insert(out.end(), msg.payload.begin(), msg.payload.end());
    }
    return out;
}

namespace {

auto malformed(DecodeErrc e, std::string detail = {}) -> DecodeResult {
    DecodeResult r;
    r.error = e;
    r.detail = std::move(detail);
    return r;
}

// Reads an extended delta/length field. Returns false on truncation or a reserved nibble.
auto read_ext(std::span<const std::uint8_t> frame, std::size_t& pos, std::uint8_t nibble,
              std::uint32_t& value) -> bool {
    if (nibble < 13) {
        value = nibble;
        return true;
    }
    if (nibble == 13) {
        if (pos + 1 > frame.size()) return false;
        value = frame[pos] + 13u;
        pos += 1;
        return true;
    }
    if (nibble == 14) {
        if (pos + 2 > frame.size()) return false;
        value = ((static_cast<std::uint32_t>(frame[pos]) << 8) | frame[pos + 1]) + 269u;
        pos += 2;
        return true;
    }
    return false;
}

struct BindingParts {
    std::optional<Bytes> addr, resource, pmin, pmax;
};

} // namespace

auto decode(std::span<const std::uint8_t> frame) -> DecodeResult {
    if (frame.size() < 4) return malformed(DecodeErrc::TooShort);
    if ((frame[0] >> 6) != version) return malformed(DecodeErrc::BadVersion);
    const std::size_t tkl = frame[0] & 0x0F;
    if (tkl > max_token_length) return malformed(DecodeErrc::BadTokenLength);

    Message msg;
    msg.type = static_cast<MessageType>((frame[0] >> 4) & 0x3);
    msg.code = static_cast<Code>(frame[1]);
    msg.mid = static_cast<MessageId>((frame[2] << 8) | frame[3]);

    if (msg.code == Code::Empty && (frame.size() != 4 || tkl != 0)) {
        return malformed(DecodeErrc::BadEmptyMessage);
    }
    if (4 + tkl > frame.size()) return malformed(DecodeErrc::Truncated, "token");
    msg.token.assign(frame.begin() + 4, frame.begin() + 4 + static_cast<std::ptrdiff_t>(tkl));

    auto& o = msg.options;
    BindingParts bind;
    std::size_t pos = 4 + tkl;
    std::uint32_t number = 0;

    while (pos < frame.size()) {
        const std::uint8_t head = frame[pos++];
        if (head == payload_marker) {
            if (pos == frame.size()) return malformed(DecodeErrc::EmptyPayload);
            msg.payload.assign(frame.begin() + static_cast<std::ptrdiff_t>(pos), frame.end());
            break;
        }
        std::uint32_t delta = 0;
        std::uint32_t len = 0;
        if (!read_ext(frame, pos, head >> 4, delta) || !read_ext(frame, pos, head & 0xF, len)) {
            return malformed(DecodeErrc::BadOption, "option header");
        }
        number += delta;
        if (number > 0xFFFF) return malformed(DecodeErrc::BadOption, "option number overflow");
        if (pos + len > frame.size()) return malformed(DecodeErrc::Truncated, "option value");
        std::span<const std::uint8_t> value = frame.subspan(pos, len);
        pos += len;

        auto uint_opt = [&](std::size_t max_len, auto& field) -> bool {
            if (value.size() > max_len || field.has_value()) return false;
            field = static_cast<std::remove_reference_t<decltype(*field)>>(decode_uint(value));
            return true;
        };
        auto once = [&](std::optional<Bytes>& slot) -> bool {
            if (slot) return false;
            slot = Bytes(value.begin(), value.end());
            return true;
        };

        bool ok = true;
        switch (number) {
        case option::observe: ok = uint_opt(3, o.observe); break;
        case option::uri_path:
            ok = value.size() <= max_string_option;
            if (ok) o.uri_path.push_back(to_text(value));
            break;
        case option::content_format: ok = uint_opt(2, o.content_format); break;
        case option::max_age: ok = uint_opt(4, o.max_age); break;
        case option::uri_query:
            ok = value.size() <= max_string_option;
            if (ok) o.uri_query.push_back(to_text(value));
            break;
        case option::block1: {
            if (value.size() > 3 || o.block1) {
                ok = false;
                break;
            }
            const std::uint32_t v = decode_uint(value);
            const unsigned szx = v & 0x7;
            if (szx == 7) {
                ok = false;
                break;
            }
            o.block1 = BlockOption{v >> 4, (v & 0x8) != 0, static_cast<std::uint16_t>(16u << szx)};
            break;
        }
        case option::bind_dest_addr: ok = once(bind.addr); break;
        case option::bind_dest_resource: ok = once(bind.resource); break;
        case option::bind_pmin: ok = value.size() <= 4 && once(bind.pmin); break;
        case option::bind_pmax: ok = value.size() <= 4 && once(bind.pmax); break;
        default:
            o.other.push_back(RawOption{static_cast<std::uint16_t>(number),
                                        Bytes(value.begin(), value.end())});
            break;
        }
        if (!ok) return malformed(DecodeErrc::BadOption, fmt::format("option {}", number));
    }

    const int bind_count = bind.addr.has_value() + bind.resource.has_value() +
                           bind.pmin.has_value() + bind.pmax.has_value();
    if (bind_count != 0) {
        if (bind_count != 4) return malformed(DecodeErrc::BadOption, "incomplete binding options");
        auto addr = Address::parse(to_text(*bind.addr));
        BindingInfo b;
        b.dest_resource = to_text(*bind.resource);
        b.pmin = decode_uint(*bind.pmin);
        b.pmax = decode_uint(*bind.pmax);
        if (!addr || b.dest_resource.empty() || b.pmin > b.pmax) {
            return malformed(DecodeErrc::BadOption, "invalid binding options");
        }
        b.dest_addr = *addr;
        o.binding = std::move(b);
    }

    DecodeResult r;
    r.message = std::move(msg);
    return r;
}

} // namespace coapsd::coap
