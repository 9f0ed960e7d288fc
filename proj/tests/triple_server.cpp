// Serves a closed-form triple over the line-delimited JSON evaluator
// protocol: reads {"f":"K|h|g","x":[...]} requests on stdin and answers
// {"y":[...]} or {"error":"..."} on stdout, one line each. The triple
// descriptor is loaded from the JSON file named by argv[1].

#include <iostream>
#include <string>

#include "json.hpp"

#include "goldie/gge.hpp"
#include "goldie/json_io.hpp"

int main(int argc, char** argv) {
  using nlohmann::json;
  if (argc != 2) {
    std::cerr << "usage: triple_server <descriptor.json>\n";
    return 2;
  }

  goldie::GgeTriple triple = [&] {
    const json j = goldie::io::load_file(argv[1]);
    return goldie::io::parse_triple(j.contains("triple") ? j["triple"] : j, "$");
  }();

  std::string line;
  while (std::getline(std::cin, line)) {
    json reply;
    try {
      const json req = json::parse(line);
      const std::string f = req.at("f").get<std::string>();
      const goldie::Vector x =
          goldie::io::as_vector(req.at("x"), "$.x");
      if (!triple.domain(x)) {
        reply["error"] = "outside domain";
      } else if (f == "K") {
        const goldie::Vector y = triple.K(x);
        json arr = json::array();
        for (Eigen::Index i = 0; i < y.size(); ++i) arr.push_back(y(i));
        reply["y"] = arr;
      } else if (f == "h") {
        reply["y"] = json::array({triple.h(x)});
      } else if (f == "g") {
        reply["y"] = json::array({triple.g(x)});
      } else {
        reply["error"] = "unknown function tag: " + f;
      }
    } catch (const std::exception& e) {
      reply["error"] = e.what();
    }
    std::cout << reply.dump() << "\n" << std::flush;
  }
  return 0;
}
