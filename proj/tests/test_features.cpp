// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <doctest.h>

#include <sstream>

#include "sonnet/errors.hpp"
#include "sonnet/features.hpp"
#include "sonnet/pipeline.hpp"
#include "sonnet/synthetic.hpp"
#include "test_support.hpp"

using namespace sonnet;

namespace {

SyntheticSession Small(std::uint64_t seed) {
  SyntheticConfig cfg;
  cfg.seed = seed;
  cfg.duration_s = 40;
  cfg.missing_rate = 0.05;
  return GenerateSyntheticSession(cfg);
}

}  // namespace

TEST_CASE("feature streams round trip through the text format") {
  auto syn = Small(2);
  // Bite features on the user stream only, as the pipeline produces them.
  auto streams = PrepareStreams(syn.streams, {}, syn.annotations, 15);
  for (auto& s : streams)
    if (s.seat != 1)
      for (auto& f : s.frames) f.b.reset();
  std::stringstream io;
  WriteFeatureStreams(streams, io);
  auto back = ReadFeatureStreams(io);
  REQUIRE(back.size() == streams.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].seat == streams[i].seat);
    CHECK(back[i].fps == streams[i].fps);
    REQUIRE(back[i].frames.size() == streams[i].frames.size());
    for (std::size_t f = 0; f < back[i].frames.size(); ++f) {
      const auto& a = back[i].frames[f];
      const auto& b = streams[i].frames[f];
      INFO("seat " << back[i].seat << " frame " << f);
      REQUIRE(a.t_ms == b.t_ms);
      REQUIRE(a.o == b.o);
      REQUIRE(a.d == b.d);
      REQUIRE(a.s == b.s);
      REQUIRE(a.valid == b.valid);
      REQUIRE(a.b.has_value() == b.b.has_value());
      if (a.b) {
        REQUIRE(a.b->seconds_since_last == b.b->seconds_since_last);
        REQUIRE(a.b->count == b.b->count);
      }
    }
  }

  testing::TempDir dir("features");
  WriteFeatureStreams(syn.streams, dir / "f.csv");
  CHECK(ReadFeatureStreams(dir / "f.csv") == syn.streams);
}

TEST_CASE("header columns follow the documented order") {
  FeatureStream s;
  s.frames.resize(1);
  std::ostringstream out;
  WriteFeatureStreams(std::span<const FeatureStream>(&s, 1), out);
  const auto text = out.str();
  CHECK(text.find("seat,t_ms,s,d1,d2,d3,d4,o1,o2,") != std::string::npos);
  CHECK(text.find(",o168,valid") != std::string::npos);
}

TEST_CASE("stream validation") {
  auto syn = Small(4);
  for (const auto& s : syn.streams) CHECK_NOTHROW(s.Validate());
  auto s = syn.streams[0];
  s.frames[5].t_ms = s.frames[4].t_ms;
  CHECK_THROWS_AS(s.Validate(), Error);
  s = syn.streams[0];
  s.frames[5].t_ms += 200;
  CHECK_THROWS_AS(s.Validate(), Error);
  s = syn.streams[0];
  s.frames[3].b = BiteFeatures{1, 2};
  s.frames[4].b = BiteFeatures{1, 1};
  CHECK_THROWS_AS(s.Validate(), Error);
}

TEST_CASE("missing detections become the zero sentinel with a mask") {
  FeatureStream s;
  s.frames.resize(2);
  s.frames[0].o.fill(3.0f);
  s.frames[0].d.fill(2.0f);
  s.frames[0].valid = kGazeValid;
  s.frames[1].o.fill(3.0f);
  s.frames[1].d.fill(2.0f);
  s.frames[1].valid = kKeypointsValid;
  ApplyMissingSentinel(s);
  CHECK(s.frames[0].o[100] == 0.0f);
  CHECK(s.frames[0].d[2] == 2.0f);
  CHECK(s.frames[1].o[100] == 3.0f);
  CHECK(s.frames[1].d[2] == 0.0f);

  // The synthetic generator already follows the convention.
  auto syn = Small(6);
  int missing = 0;
  for (const auto& f : syn.streams[1].frames) {
    if (f.valid & kKeypointsValid) continue;
    ++missing;
    for (float v : f.o) REQUIRE(v == 0.0f);
  }
  CHECK(missing > 0);
}

TEST_CASE("audio frames round trip and angles normalize") {
  auto syn = Small(8);
  std::stringstream io;
  WriteAudioFrames(syn.audio, io);
  CHECK(ReadAudioFrames(io) == syn.audio);
  for (const auto& a : syn.audio) {
    CHECK(a.doa_deg >= 0.0);
    CHECK(a.doa_deg < 360.0);
  }
  CHECK(NormalizeDegrees(-30) == doctest::Approx(330));
  CHECK(NormalizeDegrees(360) == 0.0);
  CHECK(NormalizeDegrees(725) == doctest::Approx(5));
}

TEST_CASE("frame timestamps are integer rounded from the rate") {
  CHECK(FrameTimestamp(0, 15) == 0);
  CHECK(FrameTimestamp(1, 15) == 67);
  CHECK(FrameTimestamp(15, 15) == 1000);
  CHECK(FrameTimestamp(3, 30, 500) == 600);
}
