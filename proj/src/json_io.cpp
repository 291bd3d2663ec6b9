#include "egoexo/json_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

#include "egoexo/error.hpp"

namespace egoexo {
namespace {

void dump_string(const std::string& s, std::string& out) {
  // nlohmann's escaping is already deterministic.
  out += Json(s).dump();
}

void dump(const Json& value, int depth, std::string& out) {
  const std::string pad(static_cast<std::size_t>(depth + 1) * 2, ' ');
  const std::string close_pad(static_cast<std::size_t>(depth) * 2, ' ');
  switch (value.type()) {
    case Json::value_t::object: {
      if (value.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      // nlohmann::json objects are std::map backed, so iteration is sorted.
      for (auto it = value.begin(); it != value.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad;
        dump_string(it.key(), out);
        out += ": ";
        dump(it.value(), depth + 1, out);
      }
      out += "\n" + close_pad + "}";
      return;
    }
    case Json::value_t::array: {
      if (value.empty()) {
        out += "[]";
        return;
      }
      // Arrays of scalars stay on one line; matrices read row by row.
      bool scalar_only = true;
      for (const auto& item : value) {
        if (item.is_structured()) scalar_only = false;
      }
      if (scalar_only) {
        out += "[";
        for (std::size_t i = 0; i < value.size(); ++i) {
          if (i) out += ", ";
          dump(value[i], depth + 1, out);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < value.size(); ++i) {
        if (i) out += ",\n";
        out += pad;
        dump(value[i], depth + 1, out);
      }
      out += "\n" + close_pad + "]";
      return;
    }
    case Json::value_t::number_float:
      out += format_double(value.get<double>());
      return;
    case Json::value_t::string:
      dump_string(value.get_ref<const std::string&>(), out);
      return;
    default:
      out += value.dump();
      return;
  }
}

}  // namespace

std::string format_double(double value) {
  if (!std::isfinite(value)) {
    fail(ErrorCode::kInvalidArgument, "cannot serialize non-finite float");
  }
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  std::string s(buf);
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

std::string canonical_dump(const Json& value) {
  std::string out;
  dump(value, 0, out);
  out += "\n";
  return out;
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return Json::parse(buffer.str());
  } catch (const Json::parse_error& e) {
    fail(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIo, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) fail(ErrorCode::kIo, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    fail(ErrorCode::kIo, "cannot rename into " + path.string() + ": " + ec.message());
  }
}

}  // namespace egoexo
