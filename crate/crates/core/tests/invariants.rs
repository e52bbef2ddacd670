mod common;

use cforam::bench::WorkloadSpec;
use cforam::crypto::{derive_level_key, derive_tag, hash_positions};
use cforam::{AccessRequest, Error, Scheme};
use common::{assert_single_live_copy, inproc_client, snapshot, Loc};

fn schemes() -> [Scheme; 2] {
    [Scheme::Cforam, Scheme::CforamPlus]
}

#[test]
fn storage_invariants_hold_after_every_access() {
    for scheme in schemes() {
        let (mut client, servers, mut oracle) = inproc_client(scheme, 256, 32, 11);
        assert_single_live_copy(&snapshot(&client, &servers), &oracle, 256);
        for (i, req) in WorkloadSpec::uniform(11, 600).requests(256, 32).enumerate() {
            let got = client.access(&req).unwrap();
            oracle.check(i, &req, &got).unwrap();
            let snap = snapshot(&client, &servers);
            assert_single_live_copy(&snap, &oracle, 256);
            // Tags at dummied copies no longer match.
            for item in snap.reals().filter(|it| !it.live) {
                assert_ne!(snap.tags[&item.loc], derive_tag(&client.state().tk, item.addr));
            }
        }
    }
}

#[test]
fn write_then_read_returns_written_value() {
    for scheme in schemes() {
        let (mut client, _servers, oracle) = inproc_client(scheme, 256, 16, 2);
        let before = oracle.get(77).to_vec();
        assert_eq!(client.write(77, vec![0xab; 16]).unwrap(), before);
        assert_eq!(client.read(77).unwrap(), vec![0xab; 16]);
        assert_eq!(client.read(77).unwrap(), vec![0xab; 16]);
        assert_eq!(client.read(78).unwrap(), oracle.get(78));
    }
}

#[test]
fn setup_rejects_bad_inputs() {
    use cforam::transport::inproc::inproc_links;
    use cforam::{params_from_n, Client};
    let params = params_from_n(256, 8).unwrap();
    let full = |skip: u64| (0..256u64).filter(move |&a| a != skip).map(|a| (a, vec![0u8; 8]));

    let dup = full(5).chain([(4, vec![0u8; 8])]);
    let r = Client::setup(params, Scheme::Cforam, 0, 0, inproc_links([1, 2]).0, dup);
    assert!(matches!(r, Err(Error::InvalidSetup(_))));

    let short = full(5);
    let r = Client::setup(params, Scheme::Cforam, 0, 0, inproc_links([1, 2]).0, short);
    assert!(matches!(r, Err(Error::InvalidSetup(_))));

    let outside = full(5).chain([(256, vec![0u8; 8])]);
    let r = Client::setup(params, Scheme::Cforam, 0, 0, inproc_links([1, 2]).0, outside);
    assert!(matches!(r, Err(Error::AddressOutOfRange(256))));

    let wide = (0..256u64).map(|a| (a, vec![0u8; 9]));
    let r = Client::setup(params, Scheme::Cforam, 0, 0, inproc_links([1, 2]).0, wide);
    assert!(matches!(r, Err(Error::BadValueLength { expected: 8, got: 9 })));
}

#[test]
fn access_rejects_bad_requests() {
    let (mut client, _servers, _) = inproc_client(Scheme::Cforam, 256, 16, 0);
    assert!(matches!(client.read(256), Err(Error::AddressOutOfRange(256))));
    assert!(matches!(client.write(3, vec![1; 15]), Err(Error::BadValueLength { .. })));
    assert_eq!(client.state().ctr, 0);
}

#[test]
fn setup_leaves_everything_at_the_bottom_or_overflow() {
    let (client, servers, oracle) = inproc_client(Scheme::Cforam, 1024, 32, 4);
    let snap = snapshot(&client, &servers);
    let params = *client.params();
    assert_eq!(snap.reals().count(), 1024);
    assert_eq!(snap.dummies(), 0);
    for it in &snap.items {
        match it.loc {
            Loc::Level { level, .. } => assert!(level == params.big_l || level == params.ell),
            Loc::Stash(_) => {}
            Loc::Buffer(_) => panic!("buffer holds {it:?} after setup"),
        }
    }
    assert_single_live_copy(&snap, &oracle, 1024);
    assert!(client.state().full[params.big_l as usize]);
}

#[test]
fn rebuild_turns_stale_copies_into_dummies() {
    for scheme in schemes() {
        let (mut client, servers, _) = inproc_client(scheme, 256, 32, 9);
        let p = client.params().p;
        let ell = client.params().ell;
        for _ in 0..3 {
            client.read(42).unwrap();
        }
        let before = snapshot(&client, &servers);
        let buffered: Vec<_> = before.reals().filter(|i| i.addr == 42 && matches!(i.loc, Loc::Buffer(_))).collect();
        assert_eq!(buffered.len(), 3);
        assert_eq!(buffered.iter().filter(|i| i.live).count(), 1);

        for a in 0..(p as u64 - 3) {
            client.read(100 + a).unwrap();
        }
        assert_eq!(client.rebuild_counts().ell, 1);
        let after = snapshot(&client, &servers);
        let in_ell = |l: &Loc| matches!(l, Loc::Level { level, .. } if *level == ell) || matches!(l, Loc::Stash(_));
        let copies: Vec<_> = after.reals().filter(|i| i.addr == 42 && in_ell(&i.loc)).collect();
        assert_eq!(copies.len(), 1, "{copies:?}");
        assert!(copies[0].live);
        let dummies = after.items.iter().filter(|i| i.dummy && in_ell(&i.loc)).count();
        assert_eq!(dummies, 2);
        // Conservation: the p buffered items all landed in level l or the stash.
        let moved = after.items.iter().filter(|i| in_ell(&i.loc)).count();
        let had = before.items.iter().filter(|i| in_ell(&i.loc) || matches!(i.loc, Loc::Buffer(_))).count();
        assert_eq!(moved, had + (p - 3));
    }
}

#[test]
fn bottom_rebuild_leaves_exactly_n_reals_and_no_dummies() {
    for scheme in schemes() {
        let (mut client, servers, mut oracle) = inproc_client(scheme, 256, 32, 5);
        let params = *client.params();
        for (i, req) in WorkloadSpec::uniform(5, 256).requests(256, 32).enumerate() {
            let got = client.access(&req).unwrap();
            oracle.check(i, &req, &got).unwrap();
        }
        assert_eq!(client.rebuild_counts().bottom, 1);
        assert_eq!(client.state().ctr, 0);
        let snap = snapshot(&client, &servers);
        assert_eq!(snap.dummies(), 0);
        assert_eq!(snap.reals().count(), 256);
        assert!(snap.reals().all(|i| match i.loc {
            Loc::Level { level, .. } => level == params.big_l || level == params.ell,
            Loc::Stash(_) => true,
            Loc::Buffer(_) => false,
        }));
        assert_single_live_copy(&snap, &oracle, 256);
        for level in params.ell + 1..params.big_l {
            assert!(!client.state().full[level as usize]);
        }
    }
}

#[test]
fn keys_rotate_at_the_bottom_rebuild() {
    let (mut client, _servers, _) = inproc_client(Scheme::Cforam, 256, 32, 6);
    let params = *client.params();
    let (lk0, tk0) = (client.state().lk.clone(), client.state().tk.clone());
    for a in 0..256 {
        client.read(a).unwrap();
    }
    let (lk1, tk1) = (client.state().lk.clone(), client.state().tk.clone());
    assert_ne!(lk0.as_bytes(), lk1.as_bytes());
    assert_ne!(tk0.as_bytes(), tk1.as_bytes());
    let len = params.table_len(params.big_l);
    let moved = (0..64u64)
        .filter(|&a| {
            let p0 = hash_positions(&derive_level_key(&lk0, params.big_l, 0), derive_tag(&tk0, a), len);
            let p1 = hash_positions(&derive_level_key(&lk1, params.big_l, 0), derive_tag(&tk1, a), len);
            p0 != p1
        })
        .count();
    assert!(moved >= 60, "{moved}");
}

#[test]
fn keys_never_appear_on_the_wire() {
    use cforam::transport::inproc::inproc_links;
    let (mut links, _servers) = inproc_links([1, 2]);
    links.transcript_mut().capture_bytes(true);
    let mut client = common::setup_with(links, Scheme::CforamPlus, 256, 32, 8);
    let mut keys = vec![
        client.state().lk.as_bytes().to_vec(),
        client.state().tk.as_bytes().to_vec(),
        client.element_key().as_bytes().to_vec(),
    ];
    for req in WorkloadSpec::uniform(8, 300).requests(256, 32) {
        client.access(&req).unwrap();
    }
    keys.push(client.state().lk.as_bytes().to_vec());
    keys.push(client.state().tk.as_bytes().to_vec());
    let wire = client.links().transcript().captured_bytes();
    assert!(wire.len() > 1_000_000);
    for k in &keys {
        // Any 8-byte window of a key would already be suspicious.
        for w in k.windows(8) {
            assert!(!wire.windows(8).any(|x| x == w), "key material on the wire");
        }
    }
}

#[test]
fn client_holds_one_block_at_a_time() {
    for scheme in schemes() {
        let (mut client, _servers, _) = inproc_client(scheme, 256, 32, 3);
        client.gauge_mut().reset_peak();
        for req in WorkloadSpec::uniform(3, 300).requests(256, 32) {
            client.access(&req).unwrap();
        }
        assert!(client.rebuild_counts().bottom >= 1);
        assert_eq!(client.gauge().peak(), 1);
    }
}

#[test]
fn level_ell_hits_keep_the_pseudo_locator() {
    let (mut client, servers, _) = inproc_client(Scheme::CforamPlus, 256, 32, 12);
    let ell = client.params().ell;
    let p = client.params().p as u64;
    for a in 0..p {
        client.read(a).unwrap();
    }
    let snap = snapshot(&client, &servers);
    let at_ell = snap
        .reals()
        .find(|i| i.live && matches!(i.loc, Loc::Level { level, .. } if level == ell))
        .expect("level l holds a live element after its rebuild")
        .addr;
    client.read(at_ell).unwrap();
    assert_eq!(client.last_locator(), cforam::FoundLocator::NONE);

    let deep = snap.reals().find(|i| i.live && matches!(i.loc, Loc::Level { level, .. } if level > ell)).unwrap();
    client.read(deep.addr).unwrap();
    let Loc::Level { table, pos, level } = deep.loc else { unreachable!() };
    let loc = client.last_locator();
    assert_eq!((loc.f_tab as usize, loc.f_pos, loc.f_len), (table, pos, client.params().table_len(level)));
}

#[test]
fn access_requests_are_plain_data() {
    let w = AccessRequest::write(3, vec![1, 2]);
    assert_eq!(w.write_value.as_deref(), Some(&[1u8, 2][..]));
    assert_eq!(AccessRequest::read(3).write_value, None);
}
