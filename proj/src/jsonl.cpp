#include "map2seq/jsonl.hpp"

#include <fstream>
#include <sstream>

#include "map2seq/errors.hpp"

namespace map2seq {

std::vector<nlohmann::json> read_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<nlohmann::json> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void write_jsonl(const std::string& path, const std::vector<nlohmann::ordered_json>& records) {
    std::ostringstream out;
    for (const auto& r : records) out << r.dump() << '\n';
    write_text(path, out.str());
}

nlohmann::json read_json(const std::string& path) {
    try {
        return nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
}

void write_json(const std::string& path, const nlohmann::ordered_json& value) {
    write_text(path, value.dump(2) + "\n");
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    if (!out) throw IoError("write failed for " + path);
}

nlohmann::ordered_json to_json(const InstructionRecord& r) {
    nlohmann::ordered_json j;
    j["route_id"] = r.route_id;
    j["instruction_text"] = r.instruction_text;
    return j;
}

InstructionRecord instruction_from_json(const nlohmann::json& j) {
    return {j.at("route_id").get<std::string>(), j.at("instruction_text").get<std::string>()};
}

std::vector<InstructionRecord> read_instructions(const std::string& path) {
    std::vector<InstructionRecord> out;
    for (const auto& j : read_jsonl(path)) out.push_back(instruction_from_json(j));
    return out;
}

void write_instructions(const std::string& path, const std::vector<InstructionRecord>& records) {
    std::vector<nlohmann::ordered_json> rows;
    rows.reserve(records.size());
    for (const auto& r : records) rows.push_back(to_json(r));
    write_jsonl(path, rows);
}

}  // namespace map2seq
