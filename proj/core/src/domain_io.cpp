#include <fstream>
#include <sstream>

#include "json.hpp"
#include "rbmlab/error.hpp"
#include "rbmlab/geometry.hpp"

namespace rbm {

namespace {

using nlohmann::json;

double require_number(const json& params, const char* key) {
  if (!params.contains(key)) {
    throw InvalidInput(std::string("domain params missing '") + key + "'");
  }
  const json& v = params.at(key);
  if (!v.is_number()) throw InvalidInput(std::string("domain param '") + key + "' must be a number");
  return v.get<double>();
}

}  // namespace

Domain build_domain(std::string_view spec_text) {
  json doc;
  try {
    doc = json::parse(spec_text);
  } catch (const json::parse_error& e) {
    throw InvalidInput(std::string("domain spec does not parse: ") + e.what());
  }
  if (!doc.is_object()) throw InvalidInput("domain spec must be a JSON object");
  if (!doc.contains("kind") || !doc.at("kind").is_string()) {
    throw InvalidInput("domain spec requires a string field 'kind'");
  }
  const std::string kind = doc.at("kind").get<std::string>();
  const std::string name = doc.value("name", kind);
  const json params = doc.value("params", json::object());
  if (!params.is_object()) throw InvalidInput("domain 'params' must be an object");

  if (kind == "rectangle") {
    return Domain::rectangle(require_number(params, "width"), require_number(params, "height"), name);
  }
  if (kind == "horn") {
    return Domain::horn(require_number(params, "exponent"), require_number(params, "scale"),
                        require_number(params, "x_max"), name);
  }
  if (kind == "polygon") {
    if (!params.contains("vertices") || !params.at("vertices").is_array()) {
      throw InvalidInput("polygon params require an array 'vertices'");
    }
    std::vector<Point> ring;
    for (const json& v : params.at("vertices")) {
      if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
        throw InvalidInput("polygon vertex must be a pair [x, y]");
      }
      ring.push_back({v[0].get<double>(), v[1].get<double>()});
    }
    return Domain::polygon(std::move(ring), name);
  }
  throw InvalidInput("unknown domain kind '" + kind + "' (expected rectangle, polygon or horn)");
}

Domain load_domain(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open domain file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return build_domain(buf.str());
}

std::string domain_to_json(const Domain& d) {
  json doc;
  doc["name"] = d.name();
  switch (d.kind()) {
    case DomainKind::rectangle:
      doc["kind"] = "rectangle";
      doc["params"] = {{"width", d.width()}, {"height", d.height()}};
      break;
    case DomainKind::horn: {
      const HornProfile& h = *d.horn_profile();
      doc["kind"] = "horn";
      doc["params"] = {{"exponent", h.exponent}, {"scale", h.scale}, {"x_max", h.x_max}};
      break;
    }
    case DomainKind::polygon: {
      doc["kind"] = "polygon";
      json verts = json::array();
      for (const Point& p : d.boundary()) verts.push_back({p.x, p.y});
      doc["params"] = {{"vertices", verts}};
      break;
    }
  }
  return doc.dump(2);
}

}  // namespace rbm
