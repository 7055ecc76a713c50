use ribbon_gravity::ribbon::build;
use ribbon_gravity::properad::*;
use ribbon_gravity::oracle::structure_keys;
use ribbon_gravity::canonical::decode;

fn main() {
    // find rotations for the theta-theta graph: P0(0,1,2,6) P1(3,4,5,7)
    // theta edges (0,3),(1,4),(2,5); Q0(8,9,10,14) Q1(11,12,13,15) theta
    // (8,11),(9,12),(10,13); bridges (6,14),(7,15). want B=4, g=1.
    let taus = [(0,3),(1,4),(2,5),(8,11),(9,12),(10,13),(6,14),(7,15)];
    let p1_rots = [vec![3,4,5,7], vec![3,5,4,7], vec![3,4,7,5], vec![3,7,4,5], vec![3,7,5,4], vec![3,5,7,4]];
    let q1_rots = [vec![11,12,13,15], vec![11,13,12,15], vec![11,12,15,13], vec![11,15,12,13], vec![11,15,13,12], vec![11,13,15,12]];
    // phi image terms with all-4-valences for comparison
    let gamma = gamma_family(1).unwrap();
    let image = phi(&gamma, None).unwrap();
    let mut image_44_census = std::collections::BTreeSet::new();
    for (k, _) in image.terms() {
        let g = decode(k).unwrap();
        if g.vertices().iter().all(|v| v.len() == 4) {
            for (key, _) in structure_keys(&[g]) { image_44_census.insert(key); }
        }
    }
    println!("distinct 4-valent structures in phi image: {}", image_44_census.len());
    'outer: for p1 in &p1_rots {
        for q1 in &q1_rots {
            let g = build::from_rotations(
                0,
                &[vec![0,1,2,6], p1.clone(), vec![8,9,10,14], q1.clone()],
                &taus, &[], &(0..16).collect::<Vec<_>>()[..0].to_vec().iter().copied().collect::<Vec<_>>(),
            );
            // set boundaries after computing orbits
            let orbits = g.boundaries();
            if orbits.len() != 4 { continue; }
            let mut h = g.clone();
            h.boundary = orbits.iter().map(|o| o[0]).collect();
            if !h.validate().is_valid() { continue; }
            let met = h.metrics().unwrap();
            if met.genus != 1 { continue; }
            let census = structure_keys(&[h.clone()]);
            let matches = census.keys().all(|k| image_44_census.contains(k));
            println!("P1 {:?} Q1 {:?}: B=4 g=1, in image: {matches}", p1, q1);
            if matches {
                println!("  rotations found");
                break 'outer;
            }
        }
    }
}
