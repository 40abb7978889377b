#pragma once

// Plan action vocabulary. Actions render as "verb(argument)"; done takes no
// argument and accepts both "done" and "done()" on input.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sgplan {

enum class Verb { goto_, access, pickup, release, open, close, turn_on, turn_off, done };

inline const char* to_string(Verb v) {
    switch (v) {
        case Verb::goto_: return "goto";
        case Verb::access: return "access";
        case Verb::pickup: return "pickup";
        case Verb::release: return "release";
        case Verb::open: return "open";
        case Verb::close: return "close";
        case Verb::turn_on: return "turn_on";
        case Verb::turn_off: return "turn_off";
        case Verb::done: return "done";
    }
    return "?";
}

inline std::optional<Verb> verb_from(std::string_view s) {
    if (s == "goto") return Verb::goto_;
    if (s == "access") return Verb::access;
    if (s == "pickup") return Verb::pickup;
    if (s == "release") return Verb::release;
    if (s == "open") return Verb::open;
    if (s == "close") return Verb::close;
    if (s == "turn_on") return Verb::turn_on;
    if (s == "turn_off") return Verb::turn_off;
    if (s == "done") return Verb::done;
    return std::nullopt;
}

struct PlanAction {
    Verb verb = Verb::done;
    std::string arg;  // empty for done

    bool operator==(const PlanAction& other) const {
        return verb == other.verb && arg == other.arg;
    }
};

using Plan = std::vector<PlanAction>;

inline std::string to_string(const PlanAction& a) {
    if (a.verb == Verb::done) return "done";
    return std::string(to_string(a.verb)) + "(" + a.arg + ")";
}

inline std::optional<PlanAction> parse_action(std::string_view text) {
    auto strip = [](std::string_view s) {
        while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
        while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
        return s;
    };
    std::string_view s = strip(text);
    if (s == "done" || s == "done()") return PlanAction{Verb::done, ""};
    auto open_paren = s.find('(');
    if (open_paren == std::string_view::npos || s.back() != ')') return std::nullopt;
    auto verb = verb_from(strip(s.substr(0, open_paren)));
    if (!verb) return std::nullopt;
    std::string_view arg = strip(s.substr(open_paren + 1, s.size() - open_paren - 2));
    if (*verb == Verb::done) return arg.empty() ? std::optional<PlanAction>(PlanAction{Verb::done, ""})
                                                : std::nullopt;
    if (arg.empty()) return std::nullopt;
    return PlanAction{*verb, std::string(arg)};
}

inline std::string to_string(const Plan& plan) {
    std::string out = "[";
    for (std::size_t i = 0; i < plan.size(); ++i) {
        if (i) out += ", ";
        out += to_string(plan[i]);
    }
    out += "]";
    return out;
}

}  // namespace sgplan
