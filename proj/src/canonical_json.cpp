#include <cmath>
#include <cstdio>
#include <string>

#include "pathhjb/cli.hpp"

namespace pathhjb {

namespace {

void emit_double(double v, std::string& out) {
    if (!std::isfinite(v)) {
        out += "null";
        return;
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    std::string s(buf);
    if (s.find_first_of(".eE") == std::string::npos) {
        s += ".0";
    }
    out += s;
}

void emit(const nlohmann::json& j, std::string& out) {
    switch (j.type()) {
        case nlohmann::json::value_t::object: {
            out += '{';
            bool first = true;
            for (const auto& [key, value] : j.items()) {  // std::map order: sorted keys
                if (!first) out += ',';
                first = false;
                out += nlohmann::json(key).dump();
                out += ':';
                emit(value, out);
            }
            out += '}';
            break;
        }
        case nlohmann::json::value_t::array: {
            out += '[';
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i) out += ',';
                emit(j[i], out);
            }
            out += ']';
            break;
        }
        case nlohmann::json::value_t::number_float:
            emit_double(j.get<double>(), out);
            break;
        default:
            out += j.dump();
    }
}

}  // namespace

std::string canonical_dump(const nlohmann::json& j) {
    std::string out;
    emit(j, out);
    return out;
}

}  // namespace pathhjb
