mod common;

use std::io::Write;
use std::net::TcpStream;
use std::thread;
use std::time::Duration;

use crtsplit::transfer::{receive_message, send_message};
use crtsplit::transport::{gather_superblock, tcp_connect, TcpBundleListener};
use crtsplit::{AssignmentMode, ChannelId, Error, Receiver, Sender};

use common::{config, free_port_base};

fn listen(widths: &[usize]) -> (u16, TcpBundleListener) {
    loop {
        let base = free_port_base(widths.len() as u16);
        match TcpBundleListener::bind("127.0.0.1", base, widths) {
            Ok(l) => return (base, l),
            Err(Error::BindFailed { .. }) => continue,
            Err(e) => panic!("{e}"),
        }
    }
}

#[test]
fn listeners_take_consecutive_ports() {
    let (base, listener) = listen(&[3; 6]);
    let expected: Vec<u16> = (base..base + 6).collect();
    assert_eq!(listener.ports(), expected);
}

#[test]
fn port_collision_is_bind_failed() {
    let (base, _held) = listen(&[2; 4]);
    let err = TcpBundleListener::bind("127.0.0.1", base + 2, &[2; 4]).unwrap_err();
    assert!(matches!(err, Error::BindFailed { .. }), "{err}");
    assert!(err.is_transport());
}

#[test]
fn connect_without_listener_times_out() {
    let base = free_port_base(2);
    let err = tcp_connect("127.0.0.1", base, &[2, 2], Duration::from_millis(200)).unwrap_err();
    assert!(matches!(err, Error::ConnectFailed { .. }), "{err}");
}

#[test]
fn cells_written_in_pieces_reassemble() {
    let widths = [5usize, 5, 5];
    let (base, listener) = listen(&widths);
    let writer = thread::spawn(move || {
        let mut streams: Vec<TcpStream> = (0..3)
            .map(|i| TcpStream::connect(("127.0.0.1", base + i)).unwrap())
            .collect();
        for s in &streams {
            s.set_nodelay(true).unwrap();
        }
        for round in 0..3u8 {
            for (c, s) in streams.iter_mut().enumerate() {
                let cell = [round, c as u8, 0xaa, 0xbb, 0xcc];
                for byte in cell {
                    s.write_all(&[byte]).unwrap();
                    s.flush().unwrap();
                    thread::sleep(Duration::from_millis(1));
                }
            }
        }
    });
    let mut bundle = listener.accept(Some(Duration::from_secs(10))).unwrap();
    for round in 0..3u8 {
        let got = gather_superblock(&mut bundle, &[ChannelId(0), ChannelId(2)])
            .unwrap()
            .unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].payload, vec![round, 0, 0xaa, 0xbb, 0xcc]);
        assert_eq!(got[1].payload, vec![round, 2, 0xaa, 0xbb, 0xcc]);
    }
    writer.join().unwrap();
    assert!(gather_superblock(&mut bundle, &[ChannelId(0)])
        .unwrap()
        .is_none());
}

#[test]
fn stream_ending_inside_a_cell() {
    let (base, listener) = listen(&[4]);
    let writer = thread::spawn(move || {
        let mut s = TcpStream::connect(("127.0.0.1", base)).unwrap();
        s.write_all(&[1, 2, 3, 4, 5, 6]).unwrap();
    });
    let mut bundle = listener.accept(Some(Duration::from_secs(10))).unwrap();
    writer.join().unwrap();
    let ep = bundle.endpoint(ChannelId(0)).unwrap();
    assert_eq!(ep.recv_cell().unwrap(), vec![1, 2, 3, 4]);
    let err = ep.recv_cell().unwrap_err();
    assert!(matches!(err, Error::PartialCell(0)), "{err}");
    assert!(err.is_transport());
}

#[test]
fn one_channel_closing_early_is_an_error() {
    let (base, listener) = listen(&[2, 2]);
    let writer = thread::spawn(move || {
        let mut bundle = tcp_connect("127.0.0.1", base, &[2, 2], Duration::from_secs(10)).unwrap();
        bundle
            .endpoint(ChannelId(0))
            .unwrap()
            .send_cell(&[1, 1])
            .unwrap();
        bundle.close();
    });
    let mut bundle = listener.accept(Some(Duration::from_secs(10))).unwrap();
    writer.join().unwrap();
    assert!(matches!(
        gather_superblock(&mut bundle, &[ChannelId(0)]),
        Err(Error::Closed(1))
    ));
}

#[test]
fn message_round_trip_over_loopback() {
    for mode in [AssignmentMode::Dynamic, AssignmentMode::Static] {
        let cfg = config(16, 10, 4, 9, mode)
            .with_superblocks_per_session(3)
            .unwrap();
        let (base, listener) = listen(&cfg.cell_widths());
        let data: Vec<u8> = (0..20_000u32).map(|i| (i * 31 % 251) as u8).collect();
        let sending = {
            let cfg = cfg.clone();
            let data = data.clone();
            thread::spawn(move || {
                let mut bundle = tcp_connect(
                    "127.0.0.1",
                    base,
                    &cfg.cell_widths(),
                    Duration::from_secs(10),
                )
                .unwrap();
                send_message(&mut Sender::new(cfg), &data, &mut bundle, None).unwrap()
            })
        };
        let mut bundle = listener.accept(Some(Duration::from_secs(10))).unwrap();
        let got = receive_message(&mut Receiver::new(cfg), &mut bundle).unwrap();
        assert_eq!(sending.join().unwrap(), 20_000 / 64 + 1);
        assert_eq!(got, data);
    }
}
