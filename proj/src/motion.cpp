// Copyright Contributors to the splat4d Project
// SPDX-License-Identifier: Apache-2.0
//
#include "splat4d/motion.hpp"

#include "splat4d/error.hpp"

#include <cmath>
#include <string>

namespace splat4d {

namespace {

struct ObjectMembers {
    std::vector<std::size_t> indices;
};

std::map<std::int32_t, ObjectMembers> group_by_object(const SplatSet& splats) {
    std::map<std::int32_t, ObjectMembers> groups;
    for (std::size_t i = 0; i < splats.splats.size(); ++i) {
        groups[splats.splats[i].object_id].indices.push_back(i);
    }
    return groups;
}

// sin(phi/2)/phi and its derivative divided by phi, with series near zero.
void half_sinc(double phi, double& value, double& derivative_over_phi) {
    if (phi < 1e-3) {
        const double p2 = phi * phi;
        value = 0.5 - p2 / 48.0 + p2 * p2 / 3840.0;
        derivative_over_phi = -1.0 / 24.0 + p2 / 960.0;
    } else {
        const double h = 0.5 * phi;
        value = std::sin(h) / phi;
        derivative_over_phi = (0.5 * std::cos(h) * phi - std::sin(h)) / (phi * phi * phi);
    }
}

Eigen::Matrix4d left_multiplication(const Quat& a) {
    // a * b as a matrix acting on b = (w, x, y, z).
    Eigen::Matrix4d L;
    L << a.w(), -a.x(), -a.y(), -a.z(),
         a.x(), a.w(), -a.z(), a.y(),
         a.y(), a.z(), a.w(), -a.x(),
         a.z(), -a.y(), a.x(), a.w();
    return L;
}

Eigen::Matrix4d right_multiplication(const Quat& b) {
    // a * b as a matrix acting on a = (w, x, y, z).
    Eigen::Matrix4d R;
    R << b.w(), -b.x(), -b.y(), -b.z(),
         b.x(), b.w(), b.z(), -b.y(),
         b.y(), -b.z(), b.w(), b.x(),
         b.z(), b.y(), -b.x(), b.w();
    return R;
}

Vec4 wxyz(const Quat& q) { return {q.w(), q.x(), q.y(), q.z()}; }

}  // namespace

void MotionTable::set(const ObjectMotion& m) {
    if (m.object_id == kStaticObject) {
        ObjectMotion s;
        s.centroid = m.centroid;
        entries_[kStaticObject] = s;
        return;
    }
    entries_[m.object_id] = m;
}

const ObjectMotion& MotionTable::at(std::int32_t id) const {
    const auto it = entries_.find(id);
    if (it == entries_.end()) {
        throw DomainError("motion table has no entry for object " + std::to_string(id));
    }
    return it->second;
}

ObjectMotion& MotionTable::at(std::int32_t id) {
    const auto it = entries_.find(id);
    if (it == entries_.end()) {
        throw DomainError("motion table has no entry for object " + std::to_string(id));
    }
    return it->second;
}

Quat rotation_vector_quaternion(const Vec3& theta) {
    const double phi = theta.norm();
    double s = 0.0;
    double unused = 0.0;
    half_sinc(phi, s, unused);
    return Quat(std::cos(0.5 * phi), s * theta.x(), s * theta.y(), s * theta.z());
}

Eigen::Matrix<double, 4, 3> rotation_vector_quaternion_jacobian(const Vec3& theta) {
    const double phi = theta.norm();
    double s = 0.0;
    double ds_over_phi = 0.0;
    half_sinc(phi, s, ds_over_phi);
    Eigen::Matrix<double, 4, 3> J;
    // d cos(phi/2) / d theta = -sin(phi/2)/2 * theta/phi = -(s/2) * theta
    J.row(0) = -0.5 * s * theta.transpose();
    J.bottomRows<3>() = s * Mat3::Identity() + ds_over_phi * theta * theta.transpose();
    return J;
}

MotionTable aggregate(const SplatSet& splats) { return aggregate(splats, {}); }

MotionTable aggregate(const SplatSet& splats, std::span<const std::int32_t> expected_ids) {
    const auto groups = group_by_object(splats);
    for (const std::int32_t id : expected_ids) {
        if (!groups.contains(id)) {
            throw AggregationError("object " + std::to_string(id) + " has no member splats");
        }
    }

    MotionTable table;
    for (const auto& [id, group] : groups) {
        if (id == kStaticObject) {
            continue;
        }
        if (id < 0) {
            throw AggregationError("negative object id " + std::to_string(id));
        }
        const double n = static_cast<double>(group.indices.size());
        ObjectMotion m;
        m.object_id = id;
        for (const std::size_t i : group.indices) {
            const Splat& s = splats.splats[i];
            m.centroid += s.mean;
            m.linear_velocity += s.velocity;
            m.linear_acceleration += s.acceleration;
        }
        m.centroid /= n;
        m.linear_velocity /= n;
        m.linear_acceleration /= n;

        std::size_t valid = 0;
        for (const std::size_t i : group.indices) {
            const Splat& s = splats.splats[i];
            const Vec3 p = s.mean - m.centroid;
            const double n2 = p.squaredNorm();
            if (std::sqrt(n2) < kCentroidEpsilon) {
                continue;
            }
            m.angular_velocity += p.cross(s.velocity - m.linear_velocity) / n2;
            m.angular_acceleration += p.cross(s.acceleration - m.linear_acceleration) / n2;
            ++valid;
        }
        if (valid > 0) {
            m.angular_velocity /= static_cast<double>(valid);
            m.angular_acceleration /= static_cast<double>(valid);
        }
        table.set(m);
    }
    return table;
}

SplatSet propagate(const SplatSet& splats, const MotionTable& motion, double dt) {
    if (!(dt >= 0.0)) {
        throw DomainError("propagate requires dt >= 0, got " + std::to_string(dt));
    }
    SplatSet out = splats;
    if (dt == 0.0) {
        return out;
    }
    const double half_dt2 = 0.5 * dt * dt;
    for (Splat& s : out.splats) {
        if (s.object_id == kStaticObject) {
            continue;
        }
        const ObjectMotion& m = motion.at(s.object_id);
        if (m.is_zero()) {
            continue;
        }
        const Vec3 theta = m.angular_velocity * dt + m.angular_acceleration * half_dt2;
        const Quat q = rotation_vector_quaternion(theta);
        const Vec3 p = s.mean - m.centroid;
        s.mean = s.mean + (m.linear_velocity * dt + m.linear_acceleration * half_dt2) + (q * p - p);
        s.rotation = q * s.rotation;
        s.velocity = s.velocity + s.acceleration * dt;
    }
    return out;
}

MotionTable advance(const MotionTable& motion, double dt) {
    MotionTable out;
    for (const auto& [id, m] : motion) {
        ObjectMotion a = m;
        a.centroid = m.centroid + m.linear_velocity * dt + 0.5 * dt * dt * m.linear_acceleration;
        a.linear_velocity = m.linear_velocity + m.linear_acceleration * dt;
        a.angular_velocity = m.angular_velocity + m.angular_acceleration * dt;
        out.set(a);
    }
    return out;
}

PropagateGradients propagate_backward(const SplatSet& splats, const MotionTable& motion, double dt,
                                      std::span<const SplatGradient> grad_out) {
    if (grad_out.size() != splats.splats.size()) {
        throw ShapeError("propagate_backward: gradient count does not match the splat set");
    }
    PropagateGradients out;
    out.splats.assign(grad_out.begin(), grad_out.end());
    if (dt == 0.0) {
        return out;
    }
    const double half_dt2 = 0.5 * dt * dt;
    for (std::size_t i = 0; i < splats.splats.size(); ++i) {
        const Splat& s = splats.splats[i];
        if (s.object_id == kStaticObject) {
            continue;
        }
        const ObjectMotion& m = motion.at(s.object_id);
        const SplatGradient& g = grad_out[i];
        SplatGradient& gi = out.splats[i];
        ObjectMotionGradient& gm = out.motion[s.object_id];

        const Vec3 theta = m.angular_velocity * dt + m.angular_acceleration * half_dt2;
        const Quat q = rotation_vector_quaternion(theta);
        const Vec4 qv = wxyz(q);
        const Mat3 R = quaternion_matrix(qv);
        const Vec3 p = s.mean - m.centroid;

        gi.mean = R.transpose() * g.mean;
        gm.centroid += g.mean - R.transpose() * g.mean;
        gm.linear_velocity += dt * g.mean;
        gm.linear_acceleration += half_dt2 * g.mean;

        // mean' depends on q through R(q) p; rotation' = q * r.
        Vec4 gq = quaternion_matrix_backward(qv, g.mean * p.transpose());
        gq += right_multiplication(s.rotation).transpose() * g.rotation;
        gi.rotation = left_multiplication(q).transpose() * g.rotation;

        const Vec3 gtheta = rotation_vector_quaternion_jacobian(theta).transpose() * gq;
        gm.angular_velocity += dt * gtheta;
        gm.angular_acceleration += half_dt2 * gtheta;

        // velocity' = v + a dt
        gi.acceleration += dt * g.velocity;
    }
    return out;
}

void aggregate_backward(const SplatSet& splats, const MotionGradients& grad_motion,
                        std::span<SplatGradient> grads) {
    if (grads.size() != splats.splats.size()) {
        throw ShapeError("aggregate_backward: gradient count does not match the splat set");
    }
    const auto groups = group_by_object(splats);
    for (const auto& [id, gm] : grad_motion) {
        if (id == kStaticObject) {
            continue;
        }
        const auto it = groups.find(id);
        if (it == groups.end()) {
            continue;
        }
        const auto& members = it->second.indices;
        const double n = static_cast<double>(members.size());

        Vec3 centroid = Vec3::Zero();
        Vec3 v_lin = Vec3::Zero();
        Vec3 a_lin = Vec3::Zero();
        for (const std::size_t i : members) {
            centroid += splats.splats[i].mean;
            v_lin += splats.splats[i].velocity;
            a_lin += splats.splats[i].acceleration;
        }
        centroid /= n;
        v_lin /= n;
        a_lin /= n;

        std::size_t valid = 0;
        for (const std::size_t i : members) {
            if ((splats.splats[i].mean - centroid).norm() >= kCentroidEpsilon) {
                ++valid;
            }
        }

        Vec3 g_centroid = gm.centroid;
        Vec3 g_v_lin = gm.linear_velocity;
        Vec3 g_a_lin = gm.linear_acceleration;

        if (valid > 0) {
            const double inv_m = 1.0 / static_cast<double>(valid);
            for (const std::size_t i : members) {
                const Splat& s = splats.splats[i];
                const Vec3 p = s.mean - centroid;
                const double n2 = p.squaredNorm();
                if (std::sqrt(n2) < kCentroidEpsilon) {
                    continue;
                }
                const Vec3 w = s.velocity - v_lin;
                const Vec3 b = s.acceleration - a_lin;

                const Vec3 gw = gm.angular_velocity.cross(p) * (inv_m / n2);
                const Vec3 gb = gm.angular_acceleration.cross(p) * (inv_m / n2);
                const Vec3 gp = (w.cross(gm.angular_velocity) + b.cross(gm.angular_acceleration)) * (inv_m / n2) -
                                2.0 * p *
                                    (gm.angular_velocity.dot(p.cross(w)) + gm.angular_acceleration.dot(p.cross(b))) *
                                    (inv_m / (n2 * n2));

                grads[i].velocity += gw;
                grads[i].acceleration += gb;
                grads[i].mean += gp;
                g_v_lin -= gw;
                g_a_lin -= gb;
                g_centroid -= gp;
            }
        }

        for (const std::size_t i : members) {
            grads[i].mean += g_centroid / n;
            grads[i].velocity += g_v_lin / n;
            grads[i].acceleration += g_a_lin / n;
        }
    }
}

}  // namespace splat4d
