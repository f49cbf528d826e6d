// Companion external policy for exercising the adapter.
//   echo         answers every request with the built-in decision
//   fuzz         random, malformed and hostile responses (seeded)
//   hang         answers `--after` requests, then goes silent
//   crash        answers `--after` requests, then exits
#include <chrono>
#include <iostream>
#include <random>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "medsim/policy/wire.hpp"

using namespace medsim;
using namespace medsim::policy;
using nlohmann::json;

namespace {

std::string echo(const std::string& line) {
  const auto obs = decode_request(line);
  return encode_response(agent_of(obs), day_of(obs), builtin_decide(obs));
}

class Fuzzer {
 public:
  explicit Fuzzer(std::uint64_t seed) : gen_(seed) {}

  std::string respond(const std::string& line) {
    const auto obs = decode_request(line);
    json j = json::parse(encode_response(agent_of(obs), day_of(obs), builtin_decide(obs)));
    json& d = j["decision"];
    json& q = d.contains("orders") ? d["orders"] : d.contains("shipments") ? d["shipments"] : d["allocation"];
    switch (pick(16)) {
      case 0:
      case 1:
        return j.dump();
      case 2:
      case 3:
        randomize(q, 0, big() ? 1'000'000 : 500);
        return j.dump();
      case 4:
        randomize(q, -50, 50);
        return j.dump();
      case 5:
        j["agent_id"] = "hospital_999";
        return j.dump();
      case 6:
        j["day"] = j["day"].get<int>() + 1;
        return j.dump();
      case 7:
        j["protocol_version"] = 2;
        return j.dump();
      case 8:
        j["extra"] = true;
        return j.dump();
      case 9:
        j.erase("decision");
        return j.dump();
      case 10:
        q.push_back(q.empty() ? json(1) : q.back());
        return j.dump();
      case 11:
        first_leaf(q) = 1.5;
        return j.dump();
      case 12:
        first_leaf(q) = "12";
        return j.dump();
      case 13:
        first_leaf(q) = 18446744073709551615ULL;
        return j.dump();
      case 14: {
        auto s = j.dump();
        return s.substr(0, pick(static_cast<int>(s.size())));
      }
      default: {
        std::string junk;
        const int n = pick(64);
        for (int i = 0; i < n; ++i) junk.push_back(static_cast<char>(32 + pick(95)));
        return junk;
      }
    }
  }

 private:
  int pick(int n) { return std::uniform_int_distribution<int>(0, std::max(0, n - 1))(gen_); }
  bool big() { return pick(4) == 0; }

  void randomize(json& v, int lo, int hi) {
    if (v.is_array()) {
      for (auto& e : v) randomize(e, lo, hi);
    } else {
      v = std::uniform_int_distribution<int>(lo, hi)(gen_);
    }
  }

  json& first_leaf(json& v) {
    json* p = &v;
    while (p->is_array() && !p->empty()) p = &(*p)[0];
    return *p;
  }

  std::mt19937_64 gen_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"External policy for adapter testing"};
  std::string mode = "echo";
  std::uint64_t seed = 1;
  int after = 0;
  app.add_option("mode", mode, "echo | fuzz | hang | crash")->check(CLI::IsMember({"echo", "fuzz", "hang", "crash"}));
  app.add_option("--seed", seed, "fuzz seed");
  app.add_option("--after", after, "requests answered before hanging or crashing");
  CLI11_PARSE(app, argc, argv);

  std::ios::sync_with_stdio(false);
  Fuzzer fuzz(seed);
  std::string line;
  int answered = 0;
  while (std::getline(std::cin, line)) {
    if ((mode == "hang" || mode == "crash") && answered >= after) {
      if (mode == "crash") return 3;
      for (;;) std::this_thread::sleep_for(std::chrono::hours(1));
    }
    std::string reply;
    try {
      reply = mode == "fuzz" ? fuzz.respond(line) : echo(line);
    } catch (const WireError& e) {
      std::cerr << "policy: bad request: " << e.what() << '\n';
    }
    std::cout << reply << '\n' << std::flush;
    ++answered;
  }
  return 0;
}
