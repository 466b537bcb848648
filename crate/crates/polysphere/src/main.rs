fn main() {
    std::process::exit(polysphere::run());
}
