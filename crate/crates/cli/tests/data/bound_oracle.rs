// Generated by gen_bound_oracle.py; do not edit by hand.
// (train_loss, b, d, c1, c2, h, eps, delta, n, expected)
pub const BOUND_ORACLE: &[(f64, &[f64], &[f64], f64, f64, usize, f64, f64, usize, f64)] = &[
    (2.9726842826006235, &[2.4498149209210878], &[3.77403920683407], 2.3354972448070668, 28.909350724645634, 57, 1.2645426827073742, 0.10944912003544256, 78404, 100.90981119662574),
    (2.1300360260679034, &[2.6187417681384977, 2.0168370052400806, 5.030125986579222, 3.9170765749317003], &[0.0, 0.0, 0.0, 0.0], 7.854810058616407, 5.267989309991889, 8, 1.8734912428821147, 0.14952491239193638, 34272, 4.1944740261606395),
    (4.017409463169382, &[4.208738936451679], &[0.0], 1.9738136531899908, 24.432274442274544, 57, 1.0532241232387571, 0.18870575263675213, 34444, 5.9472798584690105),
    (2.5309089355342835, &[3.727509169385182, 1.9148731884470105], &[0.0, 0.0], 4.486835027380993, 17.52698798470362, 34, 1.689236179925251, 0.19155498269797475, 78799, 4.647201257656017),
    (0.8416614405214634, &[3.547084130081565, 1.125204573029247, 5.588569745055856], &[0.0, 0.0, 0.0], 4.960561504386169, 4.50349985514002, 61, 1.8176167283498343, 0.37480242692779836, 70961, 2.771996454078142),
    (4.073700676319369, &[1.869393406211529, 1.8603954131568572, 1.3317682634632853, 5.115599983903614], &[0.0, 0.0, 0.0, 2.900148473907222], 4.233387932232819, 25.174920199807485, 32, 1.1641324276786145, 0.26125816191573104, 79166, 7131.4656161039475),
    (1.7751899969740497, &[4.9689892478168645], &[2.6594562118720058], 7.367861607798724, 7.42359099730211, 5, 0.7899447148350608, 0.3030176496690784, 44354, 28.79770165872022),
    (4.528328719087743, &[2.5395121893192627, 1.3946050474369405, 1.2788280578352138, 5.3204878200776395], &[0.0, 3.8686438041732765, 1.4944003387204603, 1.7835532210995257], 2.9975001839736963, 10.227214967781169, 34, 1.1789264556207648, 0.30834491309670836, 28018, 20595.05188490354),
    (4.690474344074547, &[5.305730424592372, 3.719995218044115, 1.689528252388953], &[1.1019445380559212, 0.8841782123949278, 0.0], 7.486065878272152, 20.651010277590103, 62, 1.650339457243556, 0.13570850989064312, 20852, 6473.628955817696),
    (2.7008032415275123, &[5.378023123068589, 5.442302292334161, 2.25030387330283, 4.6426957951954035, 4.224328030125946], &[0.0, 2.625803385597617, 0.0, 0.0, 0.0], 3.0427061639355943, 16.30848147964318, 46, 0.22600789523615603, 0.25900597122057795, 83661, 581074.1576264716),
    (3.9237050270569274, &[2.2579664683569263, 2.577827923530982, 5.887988518998946, 2.921932461857386, 4.9594465221571395], &[0.0, 2.66933269882118, 1.5150243032892443, 0.18846638008938799, 0.0], 2.0388469896684267, 8.726880356008712, 12, 1.9756387775687299, 0.19836271357886706, 51343, 12282.945358874746),
    (2.839541612632458, &[4.260192895332463, 3.774728022251125, 5.407224920097911, 3.192538476638032], &[1.0305572488616708, 1.0950160402970437, 2.1387635486625736, 1.4267778762677392], 2.4851278296676096, 25.193666783387346, 50, 0.8915911184032237, 0.3663242210125591, 67659, 71703.46369355297),
    (3.9980388652169596, &[2.681914369219396, 5.146984130734803, 2.733843816406477, 5.546122094846695], &[0.0, 0.0, 0.2888395471328149, 1.3437196601805623], 5.860140258697951, 22.353838478545484, 25, 1.1280632135207718, 0.44684495158350207, 41045, 21382.62762293503),
    (3.0136206411880857, &[3.9643235756459507, 5.658828475084934, 2.511776677372116, 3.2195681236642493, 1.1242940170643039], &[3.195499253894163, 1.8614719186127346, 0.0, 1.5100876336493987, 1.7097316811137424], 3.4852992256118887, 28.825261379987, 52, 0.5160440780930585, 0.051142957670643016, 67549, 1012278.6822410935),
    (4.794172145336481, &[3.214053256257168, 4.1548512498364865], &[2.363136853498454, 3.1627117956874606], 6.359682182985101, 20.38166205577418, 45, 1.448652749530499, 0.12874200697292754, 47496, 2516.101792644606),
    (4.504179911881009, &[3.5232369664170298], &[0.0], 5.368026921597793, 19.581880009422292, 26, 1.935192938443291, 0.04334532632919437, 65618, 6.983632470703634),
    (4.836731050108859, &[2.921261411930293, 5.928488945518713], &[0.0, 3.2585466247454176], 4.86726077943881, 20.805967260693492, 58, 0.712235247253226, 0.2168582527467386, 69457, 2951.796906845732),
    (0.054216032133202474, &[5.296193797686078, 1.6687995611388762, 1.4931479866657382, 3.9347932226654594], &[0.0, 0.0, 0.0, 3.7389445177839513], 7.4403737062709645, 28.86496148359919, 21, 0.269435649888482, 0.1168192165894589, 57636, 166319.15456797808),
    (0.008470584330720343, &[4.824688146850682, 4.657777028786785], &[0.0, 1.1622604641949734], 6.76906971739288, 19.13104383178692, 8, 0.1566529548918073, 0.0989745558820477, 96664, 1488.743307149095),
    (2.186221367213821, &[1.7801047087082824, 1.921746558386549, 5.119272375693896, 5.730925124874545, 2.1385303336715396], &[0.0, 0.0, 1.117687085710266, 0.0, 0.0], 1.9854457173379876, 9.590583676605712, 49, 0.5706105084823886, 0.34541264508198494, 10245, 23070.919365401365),
];
