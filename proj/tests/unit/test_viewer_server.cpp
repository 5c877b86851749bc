// Copyright Contributors to the splat4d Project
// SPDX-License-Identifier: Apache-2.0
//
#include "splat4d/viewer_server.hpp"

#include "oracles.hpp"

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

using namespace splat4d;
using namespace splat4d::server;

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using json = nlohmann::json;

namespace {

constexpr const char* kGood = R"({"type":"view","id":7,"time":0.5,"mode":"depth","scale":0.5,
    "pose":{"q":[1,0,0,0],"t":[0.1,-0.2,0.3]}})";

std::optional<std::uint32_t> error_id(std::string_view text) {
    try {
        parse_view_request(text);
    } catch (const ProtocolError& e) {
        return e.id();
    }
    ADD_FAILURE() << "no ProtocolError for " << text;
    return 12345;
}

FrameSource test_source() {
    const oracle::DynamicScene d = oracle::two_object_scene(16);
    io::Scene s;
    s.map = d.map;
    s.intrinsics = d.intrinsics;
    s.motion = d.motion;
    return FrameSource::from_scene(s);
}

struct Reply {
    bool binary = false;
    std::string payload;
};

class Client {
public:
    explicit Client(std::uint16_t port) : ws_(ioc_) {
        tcp::resolver resolver(ioc_);
        net::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
        ws_.handshake("127.0.0.1", std::string(kSocketPath));
    }

    ~Client() {
        beast::error_code ec;
        ws_.close(websocket::close_code::normal, ec);
    }

    void send(const std::string& text) {
        ws_.text(true);
        ws_.write(net::buffer(text));
    }

    Reply receive() {
        beast::flat_buffer buffer;
        ws_.read(buffer);
        return {ws_.got_binary(), beast::buffers_to_string(buffer.data())};
    }

private:
    net::io_context ioc_;
    websocket::stream<tcp::socket> ws_;
};

http::response<http::string_body> http_get(std::uint16_t port, const std::string& target) {
    net::io_context ioc;
    tcp::resolver resolver(ioc);
    beast::tcp_stream stream(ioc);
    stream.connect(resolver.resolve("127.0.0.1", std::to_string(port)));
    http::request<http::string_body> req{http::verb::get, target, 11};
    req.set(http::field::host, "127.0.0.1");
    http::write(stream, req);
    beast::flat_buffer buffer;
    http::response<http::string_body> res;
    http::read(stream, buffer, res);
    beast::error_code ec;
    stream.socket().shutdown(tcp::socket::shutdown_both, ec);
    return res;
}

std::uint32_t reply_id(const Reply& r) {
    if (r.binary) {
        const auto* b = reinterpret_cast<const unsigned char*>(r.payload.data());
        return b[4] | (b[5] << 8) | (b[6] << 16) | (static_cast<std::uint32_t>(b[7]) << 24);
    }
    return json::parse(r.payload).at("id").get<std::uint32_t>();
}

ViewRequest request(std::uint32_t id, double time, FrameMode mode = FrameMode::Rgb, double scale = 1.0) {
    ViewRequest r;
    r.id = id;
    r.time = time;
    r.mode = mode;
    r.scale = scale;
    r.pose = Pose(Quat(Eigen::AngleAxisd(0.03, Vec3::UnitY())), Vec3(0.02, 0.0, 0.0));
    return r;
}

class ServerTest : public ::testing::Test {
protected:
    void SetUp() override {
        ServerOptions options;
        options.port = 0;
        options.max_time = 2.5;
        server_ = std::make_unique<ViewerServer>(source_, options);
        port_ = server_->start();
        ASSERT_NE(port_, 0);
    }

    std::string expected_frame(const ViewRequest& r) const {
        const io::Bytes msg =
            frame_message(r.id, render_frame_png(source_, r.pose, r.time, r.mode, r.scale, RenderSettings{}));
        return std::string(msg.begin(), msg.end());
    }

    FrameSource source_ = test_source();
    std::unique_ptr<ViewerServer> server_;
    std::uint16_t port_ = 0;
};

}  // namespace

TEST(ParseViewRequest, AcceptsFullRequest) {
    const ViewRequest r = parse_view_request(kGood);
    EXPECT_EQ(r.id, 7u);
    EXPECT_EQ(r.time, 0.5);
    EXPECT_EQ(r.mode, FrameMode::Depth);
    EXPECT_EQ(r.scale, 0.5);
    EXPECT_EQ(r.pose.translation(), Vec3(0.1, -0.2, 0.3));
    EXPECT_EQ(r.pose.wxyz(), Vec4(1, 0, 0, 0));
}

TEST(ParseViewRequest, DefaultsModeAndScale) {
    const ViewRequest r = parse_view_request(R"({"type":"view","id":0,"time":0,"pose":{"q":[1,0,0,0],"t":[0,0,0]}})");
    EXPECT_EQ(r.mode, FrameMode::Rgb);
    EXPECT_EQ(r.scale, 1.0);
}

TEST(ParseViewRequest, ErrorsCarryIdWhenReadable) {
    EXPECT_EQ(error_id("{not json"), std::nullopt);
    EXPECT_EQ(error_id("[1,2]"), std::nullopt);
    EXPECT_EQ(error_id(R"({"type":"view","time":0})"), std::nullopt);
    EXPECT_EQ(error_id(R"({"id":-1})"), std::nullopt);
    EXPECT_EQ(error_id(R"({"id":4294967296})"), std::nullopt);
    EXPECT_EQ(error_id(R"({"id":"3"})"), std::nullopt);

    const std::string pose = R"("pose":{"q":[1,0,0,0],"t":[0,0,0]})";
    EXPECT_EQ(error_id(R"({"type":"look","id":3,"time":0,)" + pose + "}"), 3u);
    EXPECT_EQ(error_id(R"({"type":"view","id":3,"time":-1,)" + pose + "}"), 3u);
    EXPECT_EQ(error_id(R"({"type":"view","id":3,"time":"soon",)" + pose + "}"), 3u);
    EXPECT_EQ(error_id(R"({"type":"view","id":3,"time":0,"mode":"normals",)" + pose + "}"), 3u);
    EXPECT_EQ(error_id(R"({"type":"view","id":3,"time":0,"scale":0.3,)" + pose + "}"), 3u);
    EXPECT_EQ(error_id(R"({"type":"view","id":3,"time":0})"), 3u);
    EXPECT_EQ(error_id(R"({"type":"view","id":3,"time":0,"pose":{"q":[1,0,0],"t":[0,0,0]}})"), 3u);
    EXPECT_EQ(error_id(R"({"type":"view","id":3,"time":0,"pose":{"q":[0,0,0,0],"t":[0,0,0]}})"), 3u);
    EXPECT_EQ(error_id(R"({"type":"view","id":4294967295,"time":0,"pose":{"q":[1,0,0,0]}})"), 4294967295u);
}

TEST(ViewRequestJson, RoundTrips) {
    const ViewRequest r = request(99, 1.25, FrameMode::Depth, 0.25);
    const ViewRequest back = parse_view_request(view_request_json(r));
    EXPECT_EQ(back.id, r.id);
    EXPECT_EQ(back.time, r.time);
    EXPECT_EQ(back.mode, r.mode);
    EXPECT_EQ(back.scale, r.scale);
    EXPECT_NEAR((back.pose.wxyz() - r.pose.wxyz()).norm(), 0.0, 1e-15);
    EXPECT_EQ(back.pose.translation(), r.pose.translation());
}

TEST(FrameMessage, MagicIdAndPayload) {
    const io::Bytes png = {0x89, 'P', 'N', 'G'};
    const io::Bytes msg = frame_message(0x01020304u, png);
    const io::Bytes expected = {'F', '4', 'D', '1', 0x04, 0x03, 0x02, 0x01, 0x89, 'P', 'N', 'G'};
    EXPECT_EQ(msg, expected);
}

TEST(ErrorMessage, Shape) {
    const json a = json::parse(error_message(5u, "bad"));
    EXPECT_EQ(a.at("type"), "error");
    EXPECT_EQ(a.at("id"), 5);
    EXPECT_EQ(a.at("message"), "bad");
    EXPECT_TRUE(json::parse(error_message(std::nullopt, "x")).at("id").is_null());
}

TEST(Metadata, DescribesScene) {
    const FrameSource src = test_source();
    ServerOptions options;
    options.max_time = 4.0;
    const json m = json::parse(metadata_json(src, options));
    EXPECT_EQ(m.at("convention"), "RDF");
    EXPECT_EQ(m.at("intrinsics").at("width"), 16);
    EXPECT_EQ(m.at("intrinsics").at("fx"), src.intrinsics.fx);
    EXPECT_EQ(m.at("max_time"), 4.0);
    EXPECT_EQ(m.at("frame_magic"), "F4D1");
    EXPECT_EQ(m.at("modes"), json({"rgb", "depth"}));
    EXPECT_EQ(m.at("scales"), json({1.0, 0.5, 0.25}));
    EXPECT_EQ(m.at("objects"), json({1, 2}));
    EXPECT_EQ(m.at("initial_pose").at("q"), json({1.0, 0.0, 0.0, 0.0}));
    EXPECT_EQ(m.at("depth_colormap").at("name"), "turbo");
    for (int a = 0; a < 3; ++a) {
        EXPECT_LE(m.at("bounds").at("min")[a].get<double>(), m.at("bounds").at("max")[a].get<double>());
    }
    EXPECT_GT(m.at("bounds").at("min")[2].get<double>(), 0.0);
}

TEST_F(ServerTest, ServesMetadata) {
    const auto res = http_get(port_, "/api/metadata");
    EXPECT_EQ(res.result(), http::status::ok);
    EXPECT_EQ(res[http::field::content_type], "application/json");
    ServerOptions options;
    options.max_time = 2.5;
    EXPECT_EQ(res.body(), metadata_json(source_, options));
    EXPECT_EQ(http_get(port_, "/api/metadata?x=1").result(), http::status::ok);
    EXPECT_EQ(http_get(port_, "/nope").result(), http::status::not_found);
}

TEST_F(ServerTest, FramesMatchOfflineRender) {
    Client client(port_);
    for (const ViewRequest& r : {request(1, 0.0), request(2, 0.8, FrameMode::Depth), request(3, 1.5, FrameMode::Rgb, 0.5)}) {
        client.send(view_request_json(r));
        const Reply reply = client.receive();
        ASSERT_TRUE(reply.binary);
        EXPECT_EQ(reply.payload, expected_frame(r)) << r.id;
    }
}

TEST_F(ServerTest, MalformedRequestKeepsChannelOpen) {
    Client client(port_);
    client.send(R"({"type":"view","id":11,"time":-3,"pose":{"q":[1,0,0,0],"t":[0,0,0]}})");
    Reply reply = client.receive();
    ASSERT_FALSE(reply.binary);
    const json err = json::parse(reply.payload);
    EXPECT_EQ(err.at("type"), "error");
    EXPECT_EQ(err.at("id"), 11);

    client.send("garbage");
    reply = client.receive();
    ASSERT_FALSE(reply.binary);
    EXPECT_TRUE(json::parse(reply.payload).at("id").is_null());

    const ViewRequest r = request(12, 0.3);
    client.send(view_request_json(r));
    reply = client.receive();
    ASSERT_TRUE(reply.binary);
    EXPECT_EQ(reply.payload, expected_frame(r));
}

TEST_F(ServerTest, BurstIsCoalescedToLatest) {
    Client client(port_);
    constexpr std::uint32_t kBurst = 30;
    for (std::uint32_t id = 1; id <= kBurst; ++id) {
        client.send(view_request_json(request(id, 0.05 * id)));
    }
    std::vector<std::uint32_t> ids;
    Reply last;
    while (ids.empty() || ids.back() != kBurst) {
        last = client.receive();
        ASSERT_TRUE(last.binary);
        ids.push_back(reply_id(last));
        ASSERT_LE(ids.size(), kBurst);
    }
    for (std::size_t i = 1; i < ids.size(); ++i) {
        EXPECT_LT(ids[i - 1], ids[i]);
    }
    EXPECT_EQ(last.payload, expected_frame(request(kBurst, 0.05 * kBurst)));
}

TEST_F(ServerTest, IndependentConnections) {
    Client a(port_);
    Client b(port_);
    const ViewRequest ra = request(1, 0.2);
    const ViewRequest rb = request(1, 0.9, FrameMode::Depth);
    a.send(view_request_json(ra));
    b.send(view_request_json(rb));
    EXPECT_EQ(b.receive().payload, expected_frame(rb));
    EXPECT_EQ(a.receive().payload, expected_frame(ra));
}

TEST_F(ServerTest, StopWithOpenConnection) {
    Client client(port_);
    client.send(view_request_json(request(1, 0.0)));
    client.receive();
    server_->stop();
    server_.reset();
}
