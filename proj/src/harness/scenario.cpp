#include "coapsd/harness/scenario.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace coapsd::harness {

auto Scenario::find_node(std::string_view name) const -> const NodeDecl* {
    for (const auto& n : nodes) {
        if (n.name == name) return &n;
    }
    return nullptr;
}

auto Scenario::find_client(std::string_view name) const -> const ClientDecl* {
    for (const auto& c : clients) {
        if (c.name == name) return &c;
    }
    return nullptr;
}

auto parse_value(std::string_view text) -> Bytes {
    if (text.starts_with("hex:")) {
        auto bytes = from_hex(text.substr(4));
        if (!bytes) throw std::invalid_argument("bad hex value");
        return *bytes;
    }
    return to_bytes(text);
}

namespace {

struct ExpectShape {
    std::size_t min_args;
    std::size_t max_args; // 0 = unbounded
    char first;           // 'n' node, 'c' client
};

const std::map<std::string, ExpectShape, std::less<>> expect_shapes{
    {"sd-types", {1, 0, 'n'}},       {"sd-count", {2, 2, 'n'}},
    {"sd-observe", {5, 5, 'n'}},     {"resource", {3, 3, 'n'}},
    {"observer", {3, 3, 'n'}},       {"no-observer", {2, 2, 'n'}},
    {"node-notifications", {2, 0, 'n'}}, {"client-observes", {2, 0, 'c'}},
    {"mid-reinit", {1, 1, 'n'}},     {"phase", {2, 2, 'n'}},
    {"recovery", {2, 2, 'n'}},       {"state-equals", {2, 2, 'n'}},
    {"loaded", {1, 0, 'n'}},         {"binding", {4, 4, 'n'}},
    {"deployed", {2, 2, 'c'}},
};

class Parser {
public:
    explicit Parser(std::string_view text) : text_{text} {}

    auto run() -> Scenario {
        std::istringstream in{std::string{text_}};
        std::string raw;
        bool header = false;
        while (std::getline(in, raw)) {
            ++line_;
            if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
            tokens_.clear();
            std::istringstream ls{raw};
            for (std::string t; ls >> t;) tokens_.push_back(t);
            if (tokens_.empty()) continue;
            if (!header) {
                if (tokens_.size() != 2 || tokens_[0] != "coapsd-scenario") {
                    fail("expected header 'coapsd-scenario 1'");
                }
                if (tokens_[1] != "1") fail("unsupported scenario version " + tokens_[1]);
                header = true;
                continue;
            }
            directive();
        }
        if (!header) fail("empty input, expected header 'coapsd-scenario 1'");
        if (!end_seen_) {
            sc_.end = sc_.events.empty() ? SimTime{} : sc_.events.back().at;
        } else if (!sc_.events.empty() && sc_.events.back().at > sc_.end) {
            fail("event after end time");
        }
        try {
            sc_.gateway.validate();
        } catch (const std::invalid_argument& e) {
            fail(e.what());
        }
        return std::move(sc_);
    }

private:
    [[noreturn]] void fail(const std::string& what) const { throw ParseError(line_, what); }

    auto arg(std::size_t i) const -> const std::string& {
        if (i >= tokens_.size()) fail("missing argument for '" + tokens_[0] + "'");
        return tokens_[i];
    }

    template <typename T>
    auto number(const std::string& s) const -> T {
        T v{};
        const auto* end = s.data() + s.size();
        auto [p, ec] = std::from_chars(s.data(), end, v);
        if (ec != std::errc{} || p != end) fail("bad number '" + s + "'");
        return v;
    }

    auto millis(const std::string& s) const -> SimDuration {
        const auto v = number<double>(s);
        if (v < 0) fail("negative time '" + s + "'");
        return sim_ms(v);
    }

    auto address(const std::string& s) const -> Address {
        auto a = Address::parse(s);
        if (!a) fail("bad address '" + s + "'");
        return *a;
    }

    auto value(const std::string& s) const -> Bytes {
        try {
            return parse_value(s);
        } catch (const std::exception&) {
            fail("bad value '" + s + "'");
        }
    }

    auto node_ref(const std::string& name) -> NodeDecl& {
        for (auto& n : sc_.nodes) {
            if (n.name == name) return n;
        }
        fail("unknown node '" + name + "'");
    }

    void client_ref(const std::string& name) const {
        if (!sc_.find_client(name)) fail("unknown client '" + name + "'");
    }

    void label_ref(const std::string& label) const {
        if (!observations_.contains(label)) fail("unknown observation '" + label + "'");
    }

    // Parses trailing "key value" pairs starting at index from.
    template <typename F>
    void options(std::size_t from, F&& on_option) const {
        for (std::size_t i = from; i < tokens_.size(); i += 2) {
            if (i + 1 >= tokens_.size()) fail("option '" + tokens_[i] + "' needs a value");
            if (!on_option(tokens_[i], tokens_[i + 1])) fail("unknown option '" + tokens_[i] + "'");
        }
    }

    void directive() {
        const auto& d = tokens_[0];
        if (d == "at") return event();
        if (!sc_.events.empty()) fail("setup directive '" + d + "' after events");
        if (d == "name") {
            sc_.name = arg(1);
        } else if (d == "seed") {
            sc_.seed = number<std::uint64_t>(arg(1));
        } else if (d == "end") {
            sc_.end = millis(arg(1));
            end_seen_ = true;
        } else if (d == "gateway") {
            gateway_directive();
        } else if (d == "node") {
            node_directive();
        } else if (d == "resource") {
            auto& n = node_ref(arg(1));
            lln::ResourceSpec r{coap::normalize_path(arg(2)), value(arg(3)), true};
            if (tokens_.size() > 4) {
                if (tokens_[4] != "sensor" || tokens_.size() > 5) fail("unexpected trailing tokens");
                r.writable = false;
            }
            n.resources.push_back(std::move(r));
        } else if (d == "flash") {
            node_ref(arg(1)).flash[arg(2)] = value(arg(3));
        } else if (d == "client") {
            if (sc_.find_client(arg(1)) || sc_.find_node(arg(1))) fail("duplicate name " + arg(1));
            const auto addr = address(arg(2));
            if (sc_.gateway.lln_prefix.contains(addr)) fail("client address inside LLN prefix");
            sc_.clients.push_back({arg(1), addr});
        } else {
            fail("unknown directive '" + d + "'");
        }
    }

    void gateway_directive() {
        sc_.gateway.gateway.addr = address(arg(1));
        options(2, [&](const std::string& k, const std::string& v) {
            if (k == "prefix") {
                auto p = Prefix::parse(v);
                if (!p) fail("bad prefix '" + v + "'");
                sc_.gateway.lln_prefix = *p;
            } else if (k == "intercept") {
                if (v != "on" && v != "off") fail("intercept takes on|off");
                sc_.gateway.interception_enabled = v == "on";
            } else if (k == "deploy") {
                if (v == "filename") {
                    sc_.gateway.deploy_mode = sd::DeployMode::FilenameOnly;
                } else if (v == "blocks") {
                    sc_.gateway.deploy_mode = sd::DeployMode::BlockCapture;
                } else {
                    fail("deploy takes filename|blocks");
                }
            } else if (k == "pacing") {
                sc_.gateway.pacing_gap = millis(v);
            } else if (k == "max-retransmit") {
                sc_.gateway.max_retransmit = number<unsigned>(v);
            } else if (k == "ack-timeout") {
                sc_.gateway.reliability.ack_timeout = millis(v);
            } else {
                return false;
            }
            return true;
        });
    }

    void node_directive() {
        NodeDecl n;
        n.name = arg(1);
        if (sc_.find_node(n.name) || sc_.find_client(n.name)) fail("duplicate name " + n.name);
        n.addr = address(arg(2));
        if (!sc_.gateway.lln_prefix.contains(n.addr)) fail("node address outside LLN prefix");
        unsigned hops = 1;
        auto rdc = lln::Rdc::NullRdc;
        double loss = 0.0;
        std::optional<double> fixed;
        options(3, [&](const std::string& k, const std::string& v) {
            if (k == "hops") {
                hops = number<unsigned>(v);
            } else if (k == "rdc") {
                auto r = lln::parse_rdc(v);
                if (!r) fail("unknown rdc '" + v + "'");
                rdc = *r;
            } else if (k == "loss") {
                loss = number<double>(v);
            } else if (k == "fixed") {
                fixed = number<double>(v);
            } else if (k == "policy") {
                if (v == "first-non") {
                    n.policy = lln::NotificationPolicy::FirstNonThenCon;
                } else if (v == "con") {
                    n.policy = lln::NotificationPolicy::AlwaysCon;
                } else if (v == "non") {
                    n.policy = lln::NotificationPolicy::AlwaysNon;
                } else {
                    fail("policy takes first-non|con|non");
                }
            } else if (k == "boot") {
                n.boot_at = millis(v);
            } else {
                return false;
            }
            return true;
        });
        n.link = lln::LinkModel::defaults(rdc, hops, loss);
        if (fixed) {
            n.link.per_hop_min_ms = *fixed;
            n.link.per_hop_max_ms = *fixed;
        }
        try {
            n.link.validate();
        } catch (const std::invalid_argument& e) {
            fail(e.what());
        }
        sc_.nodes.push_back(std::move(n));
    }

    void event() {
        Event ev;
        ev.line = line_;
        ev.at = millis(arg(1));
        if (!sc_.events.empty() && ev.at < sc_.events.back().at) fail("event times must be sorted");
        const auto& verb = arg(2);
        const std::size_t base = 3;

        auto check_arity = [&](std::size_t n) {
            if (tokens_.size() < base + n) fail("'" + verb + "' needs " + std::to_string(n) + " arguments");
        };
        auto no_trailing = [&](std::size_t n) {
            if (tokens_.size() > base + n) fail("unexpected trailing tokens after '" + verb + "'");
        };

        if (verb == "put") {
            ev.kind = EventKind::Put;
            check_arity(4);
            client_ref(ev.client = tokens_[base]);
            node_ref(ev.node = tokens_[base + 1]);
            ev.path = tokens_[base + 2];
            ev.value = value(tokens_[base + 3]);
            ev.content_format = 0;
            options(base + 4, [&](const std::string& k, const std::string& v) {
                if (k != "cf") return false;
                if (v == "none") {
                    ev.content_format.reset();
                } else {
                    ev.content_format = number<std::uint16_t>(v);
                }
                return true;
            });
        } else if (verb == "get") {
            ev.kind = EventKind::Get;
            check_arity(3);
            no_trailing(3);
            client_ref(ev.client = tokens_[base]);
            node_ref(ev.node = tokens_[base + 1]);
            ev.path = tokens_[base + 2];
        } else if (verb == "observe") {
            ev.kind = EventKind::Observe;
            check_arity(3);
            client_ref(ev.client = tokens_[base]);
            node_ref(ev.node = tokens_[base + 1]);
            ev.path = tokens_[base + 2];
            options(base + 3, [&](const std::string& k, const std::string& v) {
                if (k == "as") {
                    ev.label = v;
                } else if (k == "token") {
                    ev.token = from_hex(v);
                    if (!ev.token) fail("bad token '" + v + "'");
                    if (ev.token->size() > 8) fail("token longer than 8 bytes");
                } else {
                    return false;
                }
                return true;
            });
            if (ev.label.empty()) fail("observe needs 'as <label>'");
            if (!observations_.insert(ev.label).second) fail("duplicate observation " + ev.label);
        } else if (verb == "deregister" || verb == "reset") {
            ev.kind = verb == "reset" ? EventKind::Reset : EventKind::Deregister;
            check_arity(2);
            no_trailing(2);
            client_ref(ev.client = tokens_[base]);
            label_ref(ev.label = tokens_[base + 1]);
        } else if (verb == "bind") {
            ev.kind = EventKind::Bind;
            check_arity(5);
            client_ref(ev.client = tokens_[base]);
            node_ref(ev.node = tokens_[base + 1]);
            ev.path = tokens_[base + 2];
            ev.binding.dest_addr = address(tokens_[base + 3]);
            ev.binding.dest_resource = coap::normalize_path(tokens_[base + 4]);
            options(base + 5, [&](const std::string& k, const std::string& v) {
                if (k == "pmin") {
                    ev.binding.pmin = number<std::uint32_t>(v);
                } else if (k == "pmax") {
                    ev.binding.pmax = number<std::uint32_t>(v);
                } else {
                    return false;
                }
                return true;
            });
            if (ev.binding.dest_resource.empty()) fail("binding needs a destination resource");
            if (ev.binding.pmin > ev.binding.pmax) fail("binding needs pmin <= pmax");
        } else if (verb == "deploy") {
            ev.kind = EventKind::Deploy;
            check_arity(4);
            client_ref(ev.client = tokens_[base]);
            node_ref(ev.node = tokens_[base + 1]);
            ev.label = tokens_[base + 2];
            ev.value = value(tokens_[base + 3]);
            if (ev.value.empty()) fail("deploy needs a non-empty image");
            options(base + 4, [&](const std::string& k, const std::string& v) {
                if (k != "block") return false;
                ev.block_size = number<std::uint16_t>(v);
                return true;
            });
            if (!coap::BlockOption::valid_size(ev.block_size)) {
                fail("block size must be a power of two in 16..1024");
            }
        } else if (verb == "change" || verb == "notify") {
            const bool change = verb == "change";
            ev.kind = change ? EventKind::Change : EventKind::Notify;
            check_arity(change ? 3 : 2);
            auto& n = node_ref(ev.node = tokens_[base]);
            ev.path = coap::normalize_path(tokens_[base + 1]);
            bool known = false;
            for (const auto& r : n.resources) known = known || r.path == ev.path;
            if (!known) fail("node " + n.name + " has no resource /" + ev.path);
            std::size_t next = base + 2;
            if (change) ev.value = value(tokens_[next++]);
            options(next, [&](const std::string& k, const std::string& v) {
                if (k != "observe") return false;
                ev.observe = number<std::uint32_t>(v);
                return true;
            });
        } else if (verb == "crash") {
            ev.kind = EventKind::Crash;
            check_arity(2);
            no_trailing(2);
            node_ref(ev.node = tokens_[base]);
            ev.duration = millis(tokens_[base + 1]);
        } else if (verb == "silence") {
            ev.kind = EventKind::Silence;
            check_arity(2);
            no_trailing(2);
            client_ref(ev.client = tokens_[base]);
            if (tokens_[base + 1] != "on" && tokens_[base + 1] != "off") fail("silence takes on|off");
            ev.flag = tokens_[base + 1] == "on";
        } else if (verb == "capture") {
            ev.kind = EventKind::Capture;
            check_arity(2);
            no_trailing(2);
            node_ref(ev.node = tokens_[base]);
            ev.label = tokens_[base + 1];
            captures_.insert(ev.label);
        } else if (verb == "expect") {
            expect_event(ev, base);
        } else {
            fail("unknown event '" + verb + "'");
        }
        sc_.events.push_back(std::move(ev));
    }

    void expect_event(Event& ev, std::size_t base) {
        ev.kind = EventKind::Expect;
        ev.expect = arg(base);
        auto shape = expect_shapes.find(ev.expect);
        if (shape == expect_shapes.end()) fail("unknown expectation '" + ev.expect + "'");
        std::size_t last = tokens_.size();
        if (last >= base + 3 && tokens_[last - 2] == "as") {
            ev.name = tokens_[last - 1];
            last -= 2;
        } else {
            ev.name = ev.expect + "@line" + std::to_string(line_);
        }
        ev.args.assign(tokens_.begin() + static_cast<std::ptrdiff_t>(base + 1),
                       tokens_.begin() + static_cast<std::ptrdiff_t>(last));
        const auto& s = shape->second;
        if (ev.args.size() < s.min_args || (s.max_args && ev.args.size() > s.max_args)) {
            fail("wrong number of operands for expectation '" + ev.expect + "'");
        }
        if (s.first == 'n') {
            node_ref(ev.args[0]);
        } else {
            client_ref(ev.args[0]);
        }
        if (ev.expect == "node-notifications" || ev.expect == "client-observes") {
            label_ref(ev.args[1]);
            for (std::size_t i = 2; i < ev.args.size(); ++i) number<std::uint32_t>(ev.args[i]);
        } else if (ev.expect == "sd-count") {
            number<std::size_t>(ev.args[1]);
        } else if (ev.expect == "sd-types") {
            for (std::size_t i = 1; i < ev.args.size(); ++i) number<unsigned>(ev.args[i]);
        } else if (ev.expect == "sd-observe") {
            client_ref(ev.args[2]);
            number<std::uint32_t>(ev.args[3]);
            number<std::uint32_t>(ev.args[4]);
        } else if (ev.expect == "observer") {
            client_ref(ev.args[2]);
        } else if (ev.expect == "state-equals") {
            if (!captures_.contains(ev.args[1])) fail("unknown capture '" + ev.args[1] + "'");
        } else if (ev.expect == "phase") {
            const auto& p = ev.args[1];
            if (p != "up" && p != "down" && p != "booting" && p != "stalled") fail("bad phase " + p);
        } else if (ev.expect == "recovery") {
            const auto& r = ev.args[1];
            if (r != "complete" && r != "incomplete" && r != "none") {
                fail("recovery takes complete|incomplete|none");
            }
        } else if (ev.expect == "binding") {
            address(ev.args[2]);
        }
    }

    std::string_view text_;
    Scenario sc_;
    std::vector<std::string> tokens_;
    std::set<std::string> observations_;
    std::set<std::string> captures_;
    int line_{0};
    bool end_seen_{false};
};

} // namespace

auto parse_scenario(std::string_view text) -> Scenario {
    return Parser{text}.run();
}

auto load_scenario(const std::string& path) -> Scenario {
    std::ifstream in{path};
    if (!in) throw std::runtime_error("cannot open scenario file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

} // namespace coapsd::harness
