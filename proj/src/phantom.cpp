#include "spinegrade/phantom.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "spinegrade/error.hpp"

namespace spinegrade::phantom {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(std::string_view key, std::string_view value) {
    throw Error(ErrorCode::InvalidConfig, "bad value '" + std::string(value) + "' for " + std::string(key));
}

template <typename T>
T number(std::string_view key, std::string_view v) {
    v = trim(v);
    T out{};
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) bad(key, v);
    return out;
}

template <typename T>
std::vector<T> list(std::string_view key, std::string_view v) {
    if (v.size() < 2 || v.front() != '[' || v.back() != ']') bad(key, v);
    v = v.substr(1, v.size() - 2);
    std::vector<T> out;
    while (!trim(v).empty()) {
        const auto comma = v.find(',');
        out.push_back(number<T>(key, v.substr(0, comma)));
        if (comma == std::string_view::npos) break;
        v = v.substr(comma + 1);
    }
    return out;
}

bool boolean(std::string_view key, std::string_view v) {
    if (v == "true") return true;
    if (v == "false") return false;
    bad(key, v);
}

}  // namespace

PhantomSpec parse_phantom_spec(std::string_view text) {
    PhantomSpec s;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty() || line.front() == '[') continue;  // blank or a [section] header
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw Error(ErrorCode::InvalidConfig, "line " + std::to_string(line_no) + ": expected key = value");
        const std::string_view key = trim(line.substr(0, eq));
        const std::string_view v = trim(line.substr(eq + 1));
        struct Real {
            std::string_view name;
            double* field;
        };
        const Real reals[] = {{"first_centroid_y", &s.first_centroid_y},
                              {"arc_spacing", &s.arc_spacing},
                              {"body_width", &s.body_width},
                              {"body_height", &s.body_height},
                              {"body_depth", &s.body_depth},
                              {"s1_bottom_width", &s.s1_bottom_width},
                              {"background", &s.background},
                              {"body_intensity", &s.body_intensity},
                              {"disc_intensity", &s.disc_intensity},
                              {"canal_intensity", &s.canal_intensity},
                              {"noise_sigma", &s.noise_sigma},
                              {"jitter_sigma", &s.jitter_sigma},
                              {"marker_radius", &s.marker_radius},
                              {"canal_marker_offset", &s.canal_marker_offset},
                              {"foramen_marker_offset", &s.foramen_marker_offset},
                              {"foramen_marker_lateral", &s.foramen_marker_lateral},
                              {"marker_bright", &s.marker_bright},
                              {"marker_step", &s.marker_step}};
        struct Flag {
            std::string_view name;
            bool* field;
        };
        const Flag flags[] = {{"fused_bodies", &s.fused_bodies},
                              {"missing_s1", &s.missing_s1},
                              {"extra_component", &s.extra_component},
                              {"s1_overlap", &s.s1_overlap}};
        bool done = false;
        for (const Real& r : reals)
            if (key == r.name) *r.field = number<double>(key, v), done = true;
        for (const Flag& f : flags)
            if (key == f.name) *f.field = boolean(key, v), done = true;
        if (done) continue;
        if (key == "curve") {
            s.curve = list<double>(key, v);
        } else if (key == "dims") {
            const auto d = list<std::uint32_t>(key, v);
            if (d.size() != 3) bad(key, v);
            s.dims = {d[0], d[1], d[2]};
        } else if (key == "spacing") {
            const auto d = list<float>(key, v);
            if (d.size() != 3) bad(key, v);
            s.spacing = {d[0], d[1], d[2]};
        } else if (key == "mask_inside") {
            s.mask_inside = number<float>(key, v);
        } else if (key == "mask_outside") {
            s.mask_outside = number<float>(key, v);
        } else if (key == "seed") {
            s.seed = number<std::uint64_t>(key, v);
        } else {
            throw Error(ErrorCode::InvalidConfig, "unknown phantom key '" + std::string(key) + "'");
        }
    }
    return s;
}

PhantomSpec load_phantom_spec(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open phantom spec " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_phantom_spec(ss.str());
}

std::string format_phantom_spec(const PhantomSpec& s) {
    std::ostringstream o;
    o.precision(17);
    auto vec = [&](const auto& v) {
        o << '[';
        for (std::size_t i = 0; i < v.size(); ++i) o << (i ? ", " : "") << v[i];
        o << "]\n";
    };
    o << "curve = ";
    vec(s.curve);
    o << "dims = [" << s.dims.nx << ", " << s.dims.ny << ", " << s.dims.nz << "]\n";
    o << "spacing = ";
    vec(s.spacing);
    o << "first_centroid_y = " << s.first_centroid_y << "\narc_spacing = " << s.arc_spacing
      << "\nbody_width = " << s.body_width << "\nbody_height = " << s.body_height << "\nbody_depth = " << s.body_depth
      << "\ns1_bottom_width = " << s.s1_bottom_width << "\nbackground = " << s.background
      << "\nbody_intensity = " << s.body_intensity << "\ndisc_intensity = " << s.disc_intensity
      << "\ncanal_intensity = " << s.canal_intensity << "\nnoise_sigma = " << s.noise_sigma
      << "\njitter_sigma = " << s.jitter_sigma << "\nmarker_radius = " << s.marker_radius
      << "\ncanal_marker_offset = " << s.canal_marker_offset << "\nforamen_marker_offset = " << s.foramen_marker_offset
      << "\nforamen_marker_lateral = " << s.foramen_marker_lateral << "\nmarker_bright = " << s.marker_bright
      << "\nmarker_step = " << s.marker_step << "\nmask_inside = " << s.mask_inside
      << "\nmask_outside = " << s.mask_outside << "\nseed = " << s.seed << std::boolalpha
      << "\nfused_bodies = " << s.fused_bodies << "\nmissing_s1 = " << s.missing_s1
      << "\nextra_component = " << s.extra_component << "\ns1_overlap = " << s.s1_overlap << "\n";
    return o.str();
}

std::string study_id(std::uint32_t study) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "phantom_%03u", study);
    return buf;
}

namespace {

using geom::Point2;

struct Poly {
    const std::vector<double>& c;
    double operator()(double y) const {
        double r = 0.0;
        for (auto it = c.rbegin(); it != c.rend(); ++it) r = r * y + *it;
        return r;
    }
    double slope(double y) const {
        double r = 0.0;
        for (std::size_t k = c.size(); k-- > 1;) r = r * y + static_cast<double>(k) * c[k];
        return r;
    }
};

/// Local frame of a body: u along the plane normal (posterior), v along the tangent (caudal).
struct Body {
    Vertebra label;
    Point2 center;   // area centroid
    Point2 tangent;  // unit
    double half_width = 0.0;
    double v_top = 0.0;     // cranial edge, local v
    double v_bottom = 0.0;  // caudal edge, local v
    double bottom_half_width = 0.0;

    Point2 normal() const { return {tangent.y, -tangent.x}; }
    void local(Point2 p, double& u, double& v) const {
        const double dx = p.x - center.x, dy = p.y - center.y;
        const Point2 n = normal();
        u = dx * n.x + dy * n.y;
        v = dx * tangent.x + dy * tangent.y;
    }
    bool contains(Point2 p) const {
        double u, v;
        local(p, u, v);
        if (v < v_top || v > v_bottom) return false;
        const double f = (v - v_top) / (v_bottom - v_top);
        return std::abs(u) <= half_width + f * (bottom_half_width - half_width);
    }
    std::array<Point2, 4> corners() const {
        const Point2 n = normal();
        auto at = [&](double u, double v) {
            return Point2{center.x + u * n.x + v * tangent.x, center.y + u * n.y + v * tangent.y};
        };
        return {at(-half_width, v_top), at(half_width, v_top), at(-bottom_half_width, v_bottom),
                at(bottom_half_width, v_bottom)};
    }
};

Point2 unit_tangent(double slope) {
    const double norm = std::hypot(slope, 1.0);
    return {slope / norm, 1.0 / norm};
}

/// y positions at arc lengths 0, step, 2*step, ... from y0 along x = f(y).
std::vector<double> arc_positions(const Poly& f, double y0, double step, std::size_t count) {
    std::vector<double> ys{y0};
    const double h = 1e-3;
    double y = y0, s = 0.0, target = step;
    double g0 = std::hypot(f.slope(y), 1.0);
    while (ys.size() < count) {
        const double g1 = std::hypot(f.slope(y + h), 1.0);
        const double ds = 0.5 * h * (g0 + g1);
        if (s + ds >= target) {
            // Linear interpolation inside the last step.
            ys.push_back(y + h * (target - s) / ds);
            target += step;
            continue;
        }
        s += ds;
        y += h;
        g0 = g1;
    }
    return ys;
}

struct Sphere {
    Vec3 c;
    double r2;
    double value;
};

std::string severity_word(int g, std::mt19937_64& rng) {
    static const char* mild[] = {"Mild", "Mild"};
    static const char* moderate[] = {"Moderate", "Mild-moderate", "Mild to moderate"};
    static const char* severe[] = {"Severe", "Moderate-severe", "Moderate to severe"};
    switch (g) {
        case 1: return mild[rng() % 2];
        case 2: return moderate[rng() % 3];
        default: return severe[rng() % 3];
    }
}

std::string lower_first(std::string s) {
    if (!s.empty()) s[0] = static_cast<char>(s[0] - 'A' + 'a');
    return s;
}

}  // namespace

std::string describe_level(const StenosisLabelSet& labels, std::uint64_t style_seed) {
    std::mt19937_64 rng(style_seed);
    std::string out;
    if (auto g = labels.grade(StenosisSite::SCS)) {
        static const char* canal[] = {"central canal", "spinal canal", "central spinal canal"};
        const std::string site = canal[rng() % 3];
        if (g->value() == 0)
            out += "No " + site + " stenosis.";
        else
            out += severity_word(g->value(), rng) + " " + site + " stenosis.";
    }
    const auto r = labels.grade(StenosisSite::RFS);
    const auto l = labels.grade(StenosisSite::LFS);
    static const char* foramen[] = {"neural foraminal narrowing", "foraminal stenosis", "neural foraminal stenosis"};
    const std::string site = foramen[rng() % 3];
    auto sentence = [&](const std::string& text) {
        if (!out.empty()) out += ' ';
        out += text;
    };
    auto one_side = [&](int g, const char* side) {
        if (g == 0)
            sentence(std::string("No ") + side + " " + site + ".");
        else
            sentence(severity_word(g, rng) + " " + side + " " + site + ".");
    };
    if (r && l) {
        const int rv = r->value(), lv = l->value();
        if (rv == lv && rv == 0)
            sentence("No " + site + ".");
        else if (rv == lv)
            sentence(severity_word(rv, rng) + " bilateral " + site + ".");
        else if (rv > 0 && lv > 0)
            sentence(severity_word(rv, rng) + " right and " + lower_first(severity_word(lv, rng)) + " left " + site +
                     ".");
        else {
            one_side(rv, "right");
            one_side(lv, "left");
        }
    } else {
        if (r) one_side(r->value(), "right");
        if (l) one_side(l->value(), "left");
    }
    return out;
}

Phantom generate_phantom(const PhantomSpec& spec, std::uint32_t study) {
    if (spec.curve.size() < 2) throw Error(ErrorCode::InvalidConfig, "curve needs at least two coefficients");
    for (double v : {spec.arc_spacing, spec.body_width, spec.body_height, spec.body_depth, spec.s1_bottom_width,
                     spec.marker_radius})
        if (!(v > 0.0)) throw Error(ErrorCode::InvalidConfig, "phantom sizes must be positive");
    if (!(spec.body_height < spec.arc_spacing))
        throw Error(ErrorCode::InvalidConfig, "body height must be below the arc spacing");
    if (spec.noise_sigma < 0.0 || spec.jitter_sigma < 0.0)
        throw Error(ErrorCode::InvalidConfig, "noise and jitter must be >= 0");

    const Poly f{spec.curve};
    std::mt19937_64 rng(spec.seed * 0x9E3779B97F4A7C15ULL + study);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Bodies.
    const std::vector<double> ys = arc_positions(f, spec.first_centroid_y, spec.arc_spacing, kVertebraCount);
    std::vector<Body> bodies;
    Phantom ph;
    const double a = spec.body_width, b = spec.s1_bottom_width, h = spec.body_height;
    for (std::size_t i = 0; i < kVertebraCount; ++i) {
        Body body;
        body.label = kAllVertebrae[i];
        const Point2 nominal{f(ys[i]), ys[i]};
        body.tangent = unit_tangent(f.slope(ys[i]));
        body.center = nominal;
        if (spec.jitter_sigma > 0.0) {
            body.center.x += spec.jitter_sigma * gauss(rng);
            body.center.y += spec.jitter_sigma * gauss(rng);
        }
        body.half_width = 0.5 * a;
        if (body.label == Vertebra::S1) {
            // Trapezoid whose area centroid sits on the curve point.
            body.v_top = -h * (a + 2.0 * b) / (3.0 * (a + b));
            body.v_bottom = body.v_top + h;
            body.bottom_half_width = 0.5 * b;
        } else {
            body.v_top = -0.5 * h;
            body.v_bottom = 0.5 * h;
            body.bottom_half_width = body.half_width;
        }
        bodies.push_back(body);
        ph.nominal_centroids.push_back({body.label, nominal});
        ph.truth_centroids.push_back({body.label, body.center});
    }

    const Dims d = spec.dims;
    const Vec3f sp = spec.spacing;
    ph.sagittal = Volume3D(d, sp, {0.0f, 0.0f, 0.0f});
    const Volume3D& vol = ph.sagittal;
    const double z_mid = geom::mid_sagittal_z(vol);
    const double x_max = (d.nx - 1) * static_cast<double>(sp[0]);
    const double y_max = (d.ny - 1) * static_cast<double>(sp[1]);
    const double z_max = (d.nz - 1) * static_cast<double>(sp[2]);
    auto in_plane = [&](Point2 p) { return p.x >= 0.0 && p.x <= x_max && p.y >= 0.0 && p.y <= y_max; };
    for (const Body& body : bodies)
        for (Point2 c : body.corners())
            if (!in_plane(c))
                throw Error(ErrorCode::SpecOutOfBounds, std::string(to_string(body.label)) + " leaves the volume");
    if (z_mid - 0.5 * spec.body_depth < 0.0 || z_mid + 0.5 * spec.body_depth > z_max)
        throw Error(ErrorCode::SpecOutOfBounds, "body depth exceeds the volume");

    // Truth disc frames and labels.
    std::vector<Point2> disc_points;
    for (std::size_t i = 0; i + 1 < bodies.size(); ++i) {
        geom::DiscFrame fr;
        fr.level = kAllDiscLevels[i];
        const Point2 p{0.5 * (bodies[i].center.x + bodies[i + 1].center.x),
                       0.5 * (bodies[i].center.y + bodies[i + 1].center.y)};
        fr.disc_point = p;
        fr.tangent = unit_tangent(f.slope(p.y));
        fr.plane_normal = {fr.tangent.y, -fr.tangent.x};
        ph.truth_frames.push_back(geom::build_frames(fr, z_mid));
        disc_points.push_back(p);

        StenosisLabelSet labels(fr.level);
        for (StenosisSite s : kAllSites) labels.set(s, Grade::from_int(static_cast<int>(rng() % 4)));
        ph.truth_labels.push_back(labels);
    }

    // Grade markers behind each disc.
    std::vector<Sphere> markers;
    const double r2 = spec.marker_radius * spec.marker_radius;
    for (std::size_t i = 0; i < ph.truth_frames.size(); ++i) {
        const auto& fr = ph.truth_frames[i];
        const Point2 n = fr.plane_normal;
        const Point2 p = fr.disc_point;
        auto value = [&](StenosisSite s) {
            return spec.marker_bright - spec.marker_step * ph.truth_labels[i].grade(s)->value();
        };
        markers.push_back({{p.x + spec.canal_marker_offset * n.x, p.y + spec.canal_marker_offset * n.y, z_mid},
                           r2,
                           value(StenosisSite::SCS)});
        const Vec3 f0{p.x + spec.foramen_marker_offset * n.x, p.y + spec.foramen_marker_offset * n.y, 0.0};
        markers.push_back({{f0[0], f0[1], z_mid - spec.foramen_marker_lateral}, r2, value(StenosisSite::RFS)});
        markers.push_back({{f0[0], f0[1], z_mid + spec.foramen_marker_lateral}, r2, value(StenosisSite::LFS)});
    }
    for (const Sphere& m : markers) {
        const double r = spec.marker_radius;
        if (m.c[0] - r < 0.0 || m.c[0] + r > x_max || m.c[1] - r < 0.0 || m.c[1] + r > y_max || m.c[2] - r < 0.0 ||
            m.c[2] + r > z_max)
            throw Error(ErrorCode::SpecOutOfBounds, "a grade marker leaves the volume");
    }

    // Disc spaces: the region between consecutive bodies in the frame of the disc.
    struct DiscSlab {
        Point2 center, tangent;
        double half_width, half_gap;
    };
    std::vector<DiscSlab> slabs;
    for (std::size_t i = 0; i < ph.truth_frames.size(); ++i)
        slabs.push_back({disc_points[i], ph.truth_frames[i].tangent, 0.5 * a, 0.5 * spec.arc_spacing});
    auto in_disc = [&](Point2 p) {
        for (const DiscSlab& s : slabs) {
            const double dx = p.x - s.center.x, dy = p.y - s.center.y;
            const double v = dx * s.tangent.x + dy * s.tangent.y;
            const double u = dx * s.tangent.y - dy * s.tangent.x;
            if (std::abs(v) <= s.half_gap && std::abs(u) <= s.half_width) return true;
        }
        return false;
    };

    const double canal_lo = 0.5 * a + 4.0, canal_hi = 0.5 * a + 16.0;
    const double canal_y0 = bodies.front().center.y - 0.5 * h, canal_y1 = bodies.back().center.y;
    float* data = ph.sagittal.data().data();
    for (std::uint32_t k = 0; k < d.nz; ++k) {
        const double z = k * static_cast<double>(sp[2]);
        const bool in_slab = std::abs(z - z_mid) <= 0.5 * spec.body_depth;
        const bool in_canal_z = std::abs(z - z_mid) <= 8.0;
        for (std::uint32_t j = 0; j < d.ny; ++j) {
            const double y = j * static_cast<double>(sp[1]);
            const double fy = f(y);
            // Perpendicular distance to the curve keeps the canal cross-section constant.
            const double perp = 1.0 / std::hypot(f.slope(y), 1.0);
            for (std::uint32_t i = 0; i < d.nx; ++i) {
                const double x = i * static_cast<double>(sp[0]);
                const Point2 p{x, y};
                double v = spec.background;
                if (in_slab) {
                    bool body = false;
                    for (const Body& bd : bodies)
                        if (bd.contains(p)) {
                            body = true;
                            break;
                        }
                    if (body)
                        v = spec.body_intensity;
                    else if (in_disc(p))
                        v = spec.disc_intensity;
                }
                if (in_canal_z && y >= canal_y0 && y <= canal_y1 && (x - fy) * perp >= canal_lo &&
                    (x - fy) * perp <= canal_hi)
                    v = spec.canal_intensity;
                for (const Sphere& m : markers) {
                    const double dx = x - m.c[0], dy = y - m.c[1], dz = z - m.c[2];
                    if (dx * dx + dy * dy + dz * dz <= m.r2) v = m.value;
                }
                data[vol.offset(i, j, k)] = static_cast<float>(v);
            }
        }
    }
    if (spec.noise_sigma > 0.0)
        for (float& v : ph.sagittal.data()) v = static_cast<float>(v + spec.noise_sigma * gauss(rng));

    // Mid-sagittal masks and label map.
    const Dims md{d.nx, d.ny, 1};
    const Vec3f morigin{0.0f, 0.0f, static_cast<float>(z_mid)};
    Volume3D lumbar(md, sp, morigin), sacral(md, sp, morigin);
    ph.label_map = Volume3D(md, sp, morigin);
    std::fill(lumbar.data().begin(), lumbar.data().end(), spec.mask_outside);
    std::fill(sacral.data().begin(), sacral.data().end(), spec.mask_outside);

    Body l5_extended = bodies[index(Vertebra::L5)];
    if (spec.s1_overlap) {
        const Body& s1 = bodies[index(Vertebra::S1)];
        const double dist = std::hypot(s1.center.x - l5_extended.center.x, s1.center.y - l5_extended.center.y);
        l5_extended.v_bottom = dist + s1.v_top + 4.0;
    }
    const DiscSlab& fused_gap = slabs[index(DiscLevel::L3L4)];
    const Point2 extra{f(bodies.front().center.y - 25.0), bodies.front().center.y - 25.0};
    if (spec.extra_component && (extra.y - 5.0 < 0.0 || extra.x - 5.0 < 0.0 || extra.x + 5.0 > x_max))
        throw Error(ErrorCode::SpecOutOfBounds, "the extra component leaves the volume");

    for (std::uint32_t j = 0; j < d.ny; ++j) {
        for (std::uint32_t i = 0; i < d.nx; ++i) {
            const Point2 p{i * static_cast<double>(sp[0]), j * static_cast<double>(sp[1])};
            const std::size_t o = lumbar.offset(i, j, 0);
            for (const Body& bd : bodies) {
                if (!bd.contains(p)) continue;
                ph.label_map.data()[o] = static_cast<float>(index(bd.label) + 1);
                if (bd.label == Vertebra::S1) {
                    if (!spec.missing_s1) sacral.data()[o] = spec.mask_inside;
                } else {
                    lumbar.data()[o] = spec.mask_inside;
                }
            }
            if (spec.s1_overlap && l5_extended.contains(p)) lumbar.data()[o] = spec.mask_inside;
            if (spec.fused_bodies) {
                const double dx = p.x - fused_gap.center.x, dy = p.y - fused_gap.center.y;
                const double v = dx * fused_gap.tangent.x + dy * fused_gap.tangent.y;
                const double u = dx * fused_gap.tangent.y - dy * fused_gap.tangent.x;
                if (std::abs(v) <= fused_gap.half_gap && std::abs(u) <= fused_gap.half_width)
                    lumbar.data()[o] = spec.mask_inside;
            }
            if (spec.extra_component && std::abs(p.x - extra.x) <= 5.0 && std::abs(p.y - extra.y) <= 5.0)
                lumbar.data()[o] = spec.mask_inside;
        }
    }
    ph.lumbar = MaskVolume(std::move(lumbar));
    ph.sacral = MaskVolume(std::move(sacral));

    // Report.
    for (std::size_t i = 0; i < ph.truth_labels.size(); ++i) {
        const DiscLevel lv = ph.truth_labels[i].level();
        const Vertebra up = cranial_vertebra(lv), down = caudal_vertebra(lv);
        std::string heading = std::string(to_string(up)) + "-" + std::string(to_string(down));
        ph.report += heading + ": " + describe_level(ph.truth_labels[i], rng()) + "\n";
    }
    return ph;
}

}  // namespace spinegrade::phantom
