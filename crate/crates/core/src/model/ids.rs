/// Generates an opaque identifier: 128 random bits as 32 lowercase hex chars.
pub fn generate_ref() -> String {
    format!("{:032x}", rand::random::<u128>())
}
